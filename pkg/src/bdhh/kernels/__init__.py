"""Ragged segment kernels with backend selection.

The compiled Cython extension is preferred when importable; the numpy
implementation is the fallback. ``BDHH_KERNELS`` overrides the choice:
``auto`` (default), ``cython``, or ``numpy``. ``cython`` raises if the
extension is missing instead of silently degrading.
"""

import os

from . import ragged_np


def _load_backend(name):
    if name == "numpy":
        return ragged_np
    from . import _ragged  # noqa: PLC0415 - deliberate lazy import

    return _ragged


def get_backend(name):
    """Return the kernel module for ``name`` ('cython' or 'numpy')."""
    if name not in ("cython", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    return _load_backend(name)


_requested = os.environ.get("BDHH_KERNELS", "auto")
if _requested == "numpy":
    _impl = ragged_np
elif _requested == "cython":
    _impl = _load_backend("cython")
elif _requested == "auto":
    try:
        _impl = _load_backend("cython")
    except ImportError:
        _impl = ragged_np
else:
    raise ValueError(f"BDHH_KERNELS must be auto, cython or numpy, got {_requested!r}")

BACKEND = _impl.BACKEND
segment_softmax = _impl.segment_softmax
segment_softmax_grad = _impl.segment_softmax_grad
segment_weighted_sum = _impl.segment_weighted_sum
segment_weighted_sum_grad = _impl.segment_weighted_sum_grad

__all__ = [
    "BACKEND",
    "get_backend",
    "segment_softmax",
    "segment_softmax_grad",
    "segment_weighted_sum",
    "segment_weighted_sum_grad",
]
