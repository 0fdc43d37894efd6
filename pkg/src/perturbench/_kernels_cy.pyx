# Compiled implementations of the hot kernels (conv2d / pooling, forward and
# backward). Same contract as _kernels_np: C-contiguous float64 NCHW arrays,
# shapes validated by the caller.

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                   int stride, int padding):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t k = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h + 2 * padding - kh) // stride + 1
    cdef Py_ssize_t wo = (wd + 2 * padding - kw) // stride + 1
    y = np.zeros((n, k, ho, wo))
    cdef double[:, :, :, ::1] yv = y
    cdef Py_ssize_t b, o, i, j, ci, ki, kj, hi, wi
    cdef double acc
    with nogil:
        for b in range(n):
            for o in range(k):
                for i in range(ho):
                    for j in range(wo):
                        acc = 0.0
                        for ci in range(c):
                            for ki in range(kh):
                                hi = i * stride + ki - padding
                                if hi < 0 or hi >= h:
                                    continue
                                for kj in range(kw):
                                    wi = j * stride + kj - padding
                                    if 0 <= wi < wd:
                                        acc += x[b, ci, hi, wi] * w[o, ci, ki, kj]
                        yv[b, o, i, j] = acc
    return y


def conv2d_grad_input(double[:, :, :, ::1] gy, double[:, :, :, ::1] w,
                      Py_ssize_t height, Py_ssize_t width, int stride, int padding):
    cdef Py_ssize_t n = gy.shape[0], k = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t c = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    gx = np.zeros((n, c, height, width))
    cdef double[:, :, :, ::1] gxv = gx
    cdef Py_ssize_t b, o, i, j, ci, ki, kj, hi, wi
    cdef double g
    with nogil:
        for b in range(n):
            for o in range(k):
                for i in range(ho):
                    for j in range(wo):
                        g = gy[b, o, i, j]
                        if g == 0.0:
                            continue
                        for ci in range(c):
                            for ki in range(kh):
                                hi = i * stride + ki - padding
                                if hi < 0 or hi >= height:
                                    continue
                                for kj in range(kw):
                                    wi = j * stride + kj - padding
                                    if 0 <= wi < width:
                                        gxv[b, ci, hi, wi] += g * w[o, ci, ki, kj]
    return gx


def conv2d_grad_kernel(double[:, :, :, ::1] gy, double[:, :, :, ::1] x,
                       Py_ssize_t kh, Py_ssize_t kw, int stride, int padding):
    cdef Py_ssize_t n = gy.shape[0], k = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    gw = np.zeros((k, c, kh, kw))
    cdef double[:, :, :, ::1] gwv = gw
    cdef Py_ssize_t b, o, i, j, ci, ki, kj, hi, wi
    cdef double g
    with nogil:
        for b in range(n):
            for o in range(k):
                for i in range(ho):
                    for j in range(wo):
                        g = gy[b, o, i, j]
                        if g == 0.0:
                            continue
                        for ci in range(c):
                            for ki in range(kh):
                                hi = i * stride + ki - padding
                                if hi < 0 or hi >= h:
                                    continue
                                for kj in range(kw):
                                    wi = j * stride + kj - padding
                                    if 0 <= wi < wd:
                                        gwv[o, ci, ki, kj] += g * x[b, ci, hi, wi]
    return gw


def maxpool_forward(double[:, :, :, ::1] x, int window, int stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = (h - window) // stride + 1
    cdef Py_ssize_t wo = (w - window) // stride + 1
    y = np.empty((n, c, ho, wo))
    idx = np.empty((n, c, ho, wo), dtype=np.int64)
    cdef double[:, :, :, ::1] yv = y
    cdef long long[:, :, :, ::1] iv = idx
    cdef Py_ssize_t b, ci, i, j, ki, kj, hi, wi, best_at
    cdef double best, v
    with nogil:
        for b in range(n):
            for ci in range(c):
                for i in range(ho):
                    for j in range(wo):
                        best = x[b, ci, i * stride, j * stride]
                        best_at = (i * stride) * w + j * stride
                        for ki in range(window):
                            hi = i * stride + ki
                            for kj in range(window):
                                wi = j * stride + kj
                                v = x[b, ci, hi, wi]
                                # strict > keeps the first (row-major) maximum
                                if v > best:
                                    best = v
                                    best_at = hi * w + wi
                        yv[b, ci, i, j] = best
                        iv[b, ci, i, j] = best_at
    return y, idx


def maxpool_grad(double[:, :, :, ::1] gy, long long[:, :, :, ::1] idx,
                 Py_ssize_t height, Py_ssize_t width):
    cdef Py_ssize_t n = gy.shape[0], c = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    gx = np.zeros((n, c, height * width))
    cdef double[:, :, ::1] gxv = gx
    cdef Py_ssize_t b, ci, i, j
    with nogil:
        for b in range(n):
            for ci in range(c):
                for i in range(ho):
                    for j in range(wo):
                        gxv[b, ci, idx[b, ci, i, j]] += gy[b, ci, i, j]
    return gx.reshape(n, c, height, width)


def avgpool_forward(double[:, :, :, ::1] x, int window, int stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = (h - window) // stride + 1
    cdef Py_ssize_t wo = (w - window) // stride + 1
    y = np.empty((n, c, ho, wo))
    cdef double[:, :, :, ::1] yv = y
    cdef double area = <double>(window * window)
    cdef Py_ssize_t b, ci, i, j, ki, kj
    cdef double acc
    with nogil:
        for b in range(n):
            for ci in range(c):
                for i in range(ho):
                    for j in range(wo):
                        acc = 0.0
                        for ki in range(window):
                            for kj in range(window):
                                acc += x[b, ci, i * stride + ki, j * stride + kj]
                        yv[b, ci, i, j] = acc / area
    return y


def avgpool_grad(double[:, :, :, ::1] gy, Py_ssize_t height, Py_ssize_t width,
                 int window, int stride):
    cdef Py_ssize_t n = gy.shape[0], c = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    gx = np.zeros((n, c, height, width))
    cdef double[:, :, :, ::1] gxv = gx
    cdef double area = <double>(window * window)
    cdef Py_ssize_t b, ci, i, j, ki, kj
    cdef double share
    with nogil:
        for b in range(n):
            for ci in range(c):
                for i in range(ho):
                    for j in range(wo):
                        share = gy[b, ci, i, j] / area
                        for ki in range(window):
                            for kj in range(window):
                                gxv[b, ci, i * stride + ki, j * stride + kj] += share
    return gx
