import numpy as np
import pytest

from perturbench import kernels


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test against every kernel backend present (compiled + fallback)."""
    return kernels.get_backend(request.param)


def conv2d_reference(x, w, b, stride, padding):
    """Direct six-nested-loop cross-correlation. Deliberately naive: this is
    the independent oracle the fast kernels are checked against."""
    n, c, h, wd = x.shape
    k, _, kh, kw = w.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, k, ho, wo))
    for bi in range(n):
        for ko in range(k):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ci in range(c):
                        for ki in range(kh):
                            for kj in range(kw):
                                hi = i * stride + ki - padding
                                wi = j * stride + kj - padding
                                if 0 <= hi < h and 0 <= wi < wd:
                                    acc += x[bi, ci, hi, wi] * w[ko, ci, ki, kj]
                    out[bi, ko, i, j] = acc + b[ko]
    return out


def finite_difference(f, x, step=1e-4):
    """Central finite differences of scalar f() w.r.t. every element of x.

    f must re-read x on each call; x is perturbed in place and restored.
    """
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f()
        flat[i] = orig - step
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * step)
    return g


def max_relative_error(a, b, floor=1e-3):
    """Max elementwise |a-b| / max(|a|, |b|, floor).

    The floor keeps finite-difference roundoff (~1e-8 absolute) from blowing
    up the ratio where the true gradient is (near) zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())
