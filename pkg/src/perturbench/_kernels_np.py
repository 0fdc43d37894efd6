"""Vectorized numpy implementations of the hot kernels.

Fallback backend used when the compiled extension is unavailable. All
functions take/return C-contiguous float64 arrays in NCHW layout; shape
validation happens one level up, in the autodiff ops.
"""

import numpy as np

BACKEND_NAME = "numpy"


def _windows(x, kh, kw, stride, padding):
    """Read-only strided view [N,C,Ho,Wo,kh,kw] over the (padded) input."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    n, c, h, w = x.shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    sn, sc, sh, sw = x.strides
    return np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, ho, wo, kh, kw),
        strides=(sn, sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )


def conv2d_forward(x, w, stride, padding):
    cols = _windows(x, w.shape[2], w.shape[3], stride, padding)
    y = np.tensordot(cols, w, axes=((1, 4, 5), (1, 2, 3)))  # [N,Ho,Wo,K]
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def conv2d_grad_input(gy, w, height, width, stride, padding):
    n = gy.shape[0]
    c, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    ho, wo = gy.shape[2], gy.shape[3]
    # [N,Ho,Wo,C,kh,kw] -> [N,C,Ho,Wo,kh,kw]
    gcols = np.tensordot(gy, w, axes=(1, 0)).transpose(0, 3, 1, 2, 4, 5)
    gx = np.zeros((n, c, height + 2 * padding, width + 2 * padding))
    for i in range(kh):
        for j in range(kw):
            gx[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += gcols[
                :, :, :, :, i, j
            ]
    if padding:
        gx = gx[:, :, padding : padding + height, padding : padding + width]
    return np.ascontiguousarray(gx)


def conv2d_grad_kernel(gy, x, kh, kw, stride, padding):
    cols = _windows(x, kh, kw, stride, padding)
    return np.ascontiguousarray(np.tensordot(gy, cols, axes=((0, 2, 3), (0, 2, 3))))


def maxpool_forward(x, window, stride):
    """Returns (pooled, argmax) with argmax as flat row-major indices into H*W.

    Ties resolve to the first window element in row-major order (argmax on
    the flattened window keeps the first occurrence).
    """
    n, c, h, w = x.shape
    win = _windows(x, window, window, stride, 0)
    ho, wo = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, ho, wo, window * window)
    q = flat.argmax(axis=4)
    y = np.take_along_axis(flat, q[..., None], axis=4)[..., 0]
    rows = np.arange(ho)[None, None, :, None] * stride + q // window
    cols = np.arange(wo)[None, None, None, :] * stride + q % window
    idx = rows * w + cols
    return np.ascontiguousarray(y), np.ascontiguousarray(idx)


def maxpool_grad(gy, idx, height, width):
    n, c = gy.shape[0], gy.shape[1]
    gx = np.zeros((n * c, height * width))
    rows = np.repeat(np.arange(n * c), idx[0, 0].size)
    np.add.at(gx, (rows, idx.reshape(-1)), gy.reshape(-1))
    return gx.reshape(n, c, height, width)


def avgpool_forward(x, window, stride):
    win = _windows(x, window, window, stride, 0)
    return np.ascontiguousarray(win.mean(axis=(4, 5)))


def avgpool_grad(gy, height, width, window, stride):
    n, c, ho, wo = gy.shape
    share = gy / float(window * window)
    gx = np.zeros((n, c, height, width))
    for i in range(window):
        for j in range(window):
            gx[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += share
    return gx
