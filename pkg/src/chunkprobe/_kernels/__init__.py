"""Convolution kernel backend selection.

The compiled Cython backend is preferred when the extension was built; the
NumPy implementation is the fallback.  `CHUNKPROBE_KERNELS=numpy|cython`
forces a backend (raises if the forced one is unavailable).  The selected
module exposes conv2d_forward / conv2d_input_grad / conv2d_weight_grad, all
operating on float64 C-contiguous NCHW arrays.
"""

import os

from . import conv_numpy

_forced = os.environ.get("CHUNKPROBE_KERNELS", "").strip().lower()

if _forced == "numpy":
    _impl = conv_numpy
elif _forced == "cython":
    from . import conv_cython as _impl  # noqa: F401  (ImportError is the contract)
elif _forced == "":
    try:
        from . import conv_cython as _impl
    except ImportError:
        _impl = conv_numpy
else:
    raise ValueError(f"unknown CHUNKPROBE_KERNELS value: {_forced!r}")

conv2d_forward = _impl.conv2d_forward
conv2d_input_grad = _impl.conv2d_input_grad
conv2d_weight_grad = _impl.conv2d_weight_grad


def backend() -> str:
    """Name of the active kernel backend ('cython' or 'numpy')."""
    return _impl.BACKEND
