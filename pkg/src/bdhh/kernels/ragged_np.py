"""Pure-numpy implementation of the ragged segment kernels.

Segments are contiguous element ranges delimited by an ``offsets`` array of
length ``n_segments + 1`` (CSR style); empty segments are allowed and produce
zero rows / no elements. This module is the import-time fallback for the
compiled ``_ragged`` extension and must match it numerically (up to float
summation order).
"""

import numpy as np

BACKEND = "numpy"


def _segment_ids(offsets, nonempty_only=False):
    lengths = np.diff(offsets)
    if nonempty_only:
        mask = lengths > 0
        return np.repeat(np.arange(mask.sum(), dtype=np.int64), lengths[mask])
    return np.repeat(np.arange(lengths.shape[0], dtype=np.int64), lengths)


def segment_softmax(logits, offsets):
    """Per-segment stable softmax; returns one weight per element."""
    logits = np.ascontiguousarray(logits, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    lengths = np.diff(offsets)
    nonempty = lengths > 0
    if not nonempty.any():
        return np.zeros_like(logits)
    starts = offsets[:-1][nonempty]
    seg = _segment_ids(offsets, nonempty_only=True)
    peak = np.maximum.reduceat(logits, starts)
    shifted = np.exp(logits - peak[seg])
    denom = np.add.reduceat(shifted, starts)
    return shifted / denom[seg]


def segment_softmax_grad(weights, grad_weights, offsets):
    """Backward of :func:`segment_softmax`: returns gradient w.r.t. logits."""
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    grad_weights = np.ascontiguousarray(grad_weights, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    lengths = np.diff(offsets)
    nonempty = lengths > 0
    if not nonempty.any():
        return np.zeros_like(weights)
    starts = offsets[:-1][nonempty]
    seg = _segment_ids(offsets, nonempty_only=True)
    inner = np.add.reduceat(weights * grad_weights, starts)
    return weights * (grad_weights - inner[seg])


def segment_weighted_sum(weights, indices, table, offsets, n_segments=None):
    """out[s] = sum_{i in segment s} weights[i] * table[indices[i]]."""
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    table = np.ascontiguousarray(table, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    n_seg = offsets.shape[0] - 1 if n_segments is None else n_segments
    out = np.zeros((n_seg, table.shape[1]), dtype=np.float64)
    lengths = np.diff(offsets)
    nonempty = lengths > 0
    if not nonempty.any():
        return out
    starts = offsets[:-1][nonempty]
    scaled = table[indices] * weights[:, None]
    out[np.flatnonzero(nonempty)] = np.add.reduceat(scaled, starts, axis=0)
    return out


def segment_weighted_sum_grad(grad_out, weights, indices, table, offsets, grad_table):
    """Backward of :func:`segment_weighted_sum`.

    Accumulates into ``grad_table`` in place and returns the gradient w.r.t.
    the per-element weights.
    """
    grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    seg = _segment_ids(offsets)
    if seg.shape[0] == 0:
        return np.zeros_like(weights)
    expanded = grad_out[seg]
    grad_weights = np.einsum("ij,ij->i", expanded, table[indices])
    np.add.at(grad_table, indices, expanded * weights[:, None])
    return grad_weights
