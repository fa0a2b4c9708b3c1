"""Pure-NumPy convolution kernels (im2col + BLAS).

All functions take float64 C-contiguous arrays in NCHW layout with weights
laid out [out_channels, in_channels, kh, kw], valid padding only.  Each
kernel gathers patches into an im2col matrix (or scatters one back) and
runs the contraction as a single matmul.  These are the reference
implementations the Cython backend is checked against.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "numpy"


def _im2col(x, kh, kw, sh, sw):
    """Patch matrix [N*Ho*Wo, A*kh*kw] plus the output spatial size."""
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    n, a, ho, wo = win.shape[:4]
    mat = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, a * kh * kw)
    return mat, ho, wo


def conv2d_forward(x, w, sh, sw):
    """Valid cross-correlation: [N,A,H,W] * [B,A,kh,kw] -> [N,B,Ho,Wo]."""
    b, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    mat, ho, wo = _im2col(x, kh, kw, sh, sw)
    y = mat @ w.reshape(b, -1).T
    return np.ascontiguousarray(y.reshape(x.shape[0], ho, wo, b).transpose(0, 3, 1, 2))


def conv2d_input_grad(gy, w, sh, sw, height, width):
    """Gradient w.r.t. the conv input; equally the transposed-conv forward.

    Scatters [N,B,Ho,Wo] back through [B,A,kh,kw] onto [N,A,height,width].
    """
    n, b, ho, wo = gy.shape
    a, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    mat = gy.transpose(0, 2, 3, 1).reshape(n * ho * wo, b) @ w.reshape(b, -1)
    win = mat.reshape(n, ho, wo, a, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    gx = np.zeros((n, a, height, width), dtype=gy.dtype)
    for ki in range(kh):
        hs = slice(ki, ki + sh * (ho - 1) + 1, sh)
        for kj in range(kw):
            ws = slice(kj, kj + sw * (wo - 1) + 1, sw)
            gx[:, :, hs, ws] += win[:, :, :, :, ki, kj]
    return gx


def conv2d_weight_grad(x, gy, kh, kw, sh, sw):
    """Gradient w.r.t. the conv weights: [N,A,H,W] x [N,B,Ho,Wo] -> [B,A,kh,kw]."""
    mat, ho, wo = _im2col(x, kh, kw, sh, sw)
    n, b = gy.shape[0], gy.shape[1]
    g2 = gy.transpose(0, 2, 3, 1).reshape(n * ho * wo, b)
    return np.ascontiguousarray((g2.T @ mat).reshape(b, x.shape[1], kh, kw))
