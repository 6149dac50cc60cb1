# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ragged segment kernels (hot loops of the encoder and the
basket attention). Semantics match ``ragged_np``; accumulation within a
segment is strictly sequential in element order."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND = "cython"


def segment_softmax(logits, offsets):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] logits_c = np.ascontiguousarray(logits, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets_c = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(logits_c.shape[0], dtype=np.float64)
    cdef Py_ssize_t n_seg = offsets_c.shape[0] - 1
    cdef Py_ssize_t s, i, lo, hi
    cdef double peak, denom
    for s in range(n_seg):
        lo = offsets_c[s]
        hi = offsets_c[s + 1]
        if hi <= lo:
            continue
        peak = logits_c[lo]
        for i in range(lo + 1, hi):
            if logits_c[i] > peak:
                peak = logits_c[i]
        denom = 0.0
        for i in range(lo, hi):
            out[i] = exp(logits_c[i] - peak)
            denom += out[i]
        for i in range(lo, hi):
            out[i] /= denom
    return out


def segment_softmax_grad(weights, grad_weights, offsets):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gw = np.ascontiguousarray(grad_weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets_c = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(w.shape[0], dtype=np.float64)
    cdef Py_ssize_t n_seg = offsets_c.shape[0] - 1
    cdef Py_ssize_t s, i, lo, hi
    cdef double inner
    for s in range(n_seg):
        lo = offsets_c[s]
        hi = offsets_c[s + 1]
        if hi <= lo:
            continue
        inner = 0.0
        for i in range(lo, hi):
            inner += w[i] * gw[i]
        for i in range(lo, hi):
            out[i] = w[i] * (gw[i] - inner)
    return out


def segment_weighted_sum(weights, indices, table, offsets, n_segments=None):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets_c = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n_seg = offsets_c.shape[0] - 1 if n_segments is None else <Py_ssize_t> n_segments
    cdef Py_ssize_t d = tab.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_seg, d), dtype=np.float64)
    cdef Py_ssize_t s, i, j, lo, hi, row
    cdef double wi
    for s in range(offsets_c.shape[0] - 1):
        lo = offsets_c[s]
        hi = offsets_c[s + 1]
        for i in range(lo, hi):
            row = idx[i]
            wi = w[i]
            for j in range(d):
                out[s, j] += wi * tab[row, j]
    return out


def segment_weighted_sum_grad(grad_out, weights, indices, table, offsets, grad_table):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] go = np.ascontiguousarray(grad_out, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets_c = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gt = grad_table
    if gt.dtype != np.float64 or not gt.flags.c_contiguous:
        raise ValueError("grad_table must be a C-contiguous float64 array")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gw = np.zeros(w.shape[0], dtype=np.float64)
    cdef Py_ssize_t n_seg = offsets_c.shape[0] - 1
    cdef Py_ssize_t d = tab.shape[1]
    cdef Py_ssize_t s, i, j, lo, hi, row
    cdef double acc, wi
    for s in range(n_seg):
        lo = offsets_c[s]
        hi = offsets_c[s + 1]
        for i in range(lo, hi):
            row = idx[i]
            wi = w[i]
            acc = 0.0
            for j in range(d):
                acc += go[s, j] * tab[row, j]
                gt[row, j] += wi * go[s, j]
            gw[i] = acc
    return gw
