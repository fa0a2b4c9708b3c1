# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution kernels (typed im2col/col2im + BLAS matmul).

The tight loops below handle the patch gather/scatter, which is the part a
plain NumPy implementation has to emulate with stride tricks and transpose
copies; the contraction itself is one matmul through NumPy's BLAS so the
arithmetic matches the fallback backend.  Same contracts as conv_numpy;
selected at import by chunkprobe._kernels.
"""

import numpy as np

BACKEND = "cython"


cdef void _im2col(const double[:, :, :, ::1] x, double[:, ::1] cols,
                  Py_ssize_t ho, Py_ssize_t wo, Py_ssize_t kh, Py_ssize_t kw,
                  Py_ssize_t sh, Py_ssize_t sw) noexcept nogil:
    # cols[(i*ho+oh)*wo+ow, (ci*kh+ki)*kw+kj] = x[i, ci, oh*sh+ki, ow*sw+kj]
    cdef Py_ssize_t n = x.shape[0], a = x.shape[1]
    cdef Py_ssize_t i, ci, oh, ow, ki, kj, row, base
    for i in range(n):
        for oh in range(ho):
            for ow in range(wo):
                row = (i * ho + oh) * wo + ow
                for ci in range(a):
                    for ki in range(kh):
                        base = (ci * kh + ki) * kw
                        for kj in range(kw):
                            cols[row, base + kj] = x[i, ci, oh * sh + ki, ow * sw + kj]


cdef void _col2im_add(const double[:, ::1] cols, double[:, :, :, ::1] gx,
                      Py_ssize_t ho, Py_ssize_t wo, Py_ssize_t kh, Py_ssize_t kw,
                      Py_ssize_t sh, Py_ssize_t sw) noexcept nogil:
    # the adjoint scatter of _im2col: overlapping windows accumulate
    cdef Py_ssize_t n = gx.shape[0], a = gx.shape[1]
    cdef Py_ssize_t i, ci, oh, ow, ki, kj, row, base
    for i in range(n):
        for oh in range(ho):
            for ow in range(wo):
                row = (i * ho + oh) * wo + ow
                for ci in range(a):
                    for ki in range(kh):
                        base = (ci * kh + ki) * kw
                        for kj in range(kw):
                            gx[i, ci, oh * sh + ki, ow * sw + kj] += cols[row, base + kj]


cdef void _rows_from_nchw(const double[:, :, :, ::1] y, double[:, ::1] rows) noexcept nogil:
    # rows[(i*ho+oh)*wo+ow, j] = y[i, j, oh, ow]
    cdef Py_ssize_t n = y.shape[0], b = y.shape[1], ho = y.shape[2], wo = y.shape[3]
    cdef Py_ssize_t i, j, oh, ow
    for i in range(n):
        for j in range(b):
            for oh in range(ho):
                for ow in range(wo):
                    rows[(i * ho + oh) * wo + ow, j] = y[i, j, oh, ow]


cdef void _rows_to_nchw(const double[:, ::1] rows, double[:, :, :, ::1] y) noexcept nogil:
    cdef Py_ssize_t n = y.shape[0], b = y.shape[1], ho = y.shape[2], wo = y.shape[3]
    cdef Py_ssize_t i, j, oh, ow
    for i in range(n):
        for j in range(b):
            for oh in range(ho):
                for ow in range(wo):
                    y[i, j, oh, ow] = rows[(i * ho + oh) * wo + ow, j]


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w, Py_ssize_t sh, Py_ssize_t sw):
    cdef Py_ssize_t n = x.shape[0], a = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t b = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h - kh) // sh + 1, wo = (wd - kw) // sw + 1
    cols_arr = np.empty((n * ho * wo, a * kh * kw), dtype=np.float64)
    cdef double[:, ::1] cols = cols_arr
    with nogil:
        _im2col(x, cols, ho, wo, kh, kw, sh, sw)
    y2_arr = np.dot(cols_arr, np.asarray(w).reshape(b, a * kh * kw).T)
    y_arr = np.empty((n, b, ho, wo), dtype=np.float64)
    cdef double[:, ::1] y2 = y2_arr
    cdef double[:, :, :, ::1] y = y_arr
    with nogil:
        _rows_to_nchw(y2, y)
    return y_arr


def conv2d_input_grad(double[:, :, :, ::1] gy, double[:, :, :, ::1] w,
                      Py_ssize_t sh, Py_ssize_t sw, Py_ssize_t height, Py_ssize_t width):
    cdef Py_ssize_t n = gy.shape[0], b = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t a = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    g2_arr = np.empty((n * ho * wo, b), dtype=np.float64)
    cdef double[:, ::1] g2 = g2_arr
    with nogil:
        _rows_from_nchw(gy, g2)
    cols_arr = np.dot(g2_arr, np.asarray(w).reshape(b, a * kh * kw))
    gx_arr = np.zeros((n, a, height, width), dtype=np.float64)
    cdef double[:, ::1] cols = cols_arr
    cdef double[:, :, :, ::1] gx = gx_arr
    with nogil:
        _col2im_add(cols, gx, ho, wo, kh, kw, sh, sw)
    return gx_arr


def conv2d_weight_grad(double[:, :, :, ::1] x, double[:, :, :, ::1] gy,
                       Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t sh, Py_ssize_t sw):
    cdef Py_ssize_t n = x.shape[0], a = x.shape[1]
    cdef Py_ssize_t b = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    cols_arr = np.empty((n * ho * wo, a * kh * kw), dtype=np.float64)
    g2_arr = np.empty((n * ho * wo, b), dtype=np.float64)
    cdef double[:, ::1] cols = cols_arr
    cdef double[:, ::1] g2 = g2_arr
    with nogil:
        _im2col(x, cols, ho, wo, kh, kw, sh, sw)
        _rows_from_nchw(gy, g2)
    gw = np.dot(g2_arr.T, cols_arr)
    return np.ascontiguousarray(gw.reshape(b, a, kh, kw))
