"""Kernel backend selection.

Two implementations exist for every hot kernel: a compiled Cython extension
and a vectorized numpy fallback. benchmarks/bench_kernels.py shows the
split decision: convolution is GEMM-shaped, so the im2col + BLAS numpy path
beats the direct compiled loops by ~5-10x, while pooling (no BLAS
equivalent) is ~4-10x faster compiled. The default "auto" selection
therefore takes convolution from numpy and pooling from the extension.

``PERTURBENCH_KERNELS=numpy|cython`` forces one uniform backend (forcing an
unavailable one raises at import); ``auto`` is the default.
"""

import os

from . import _kernels_np
from .errors import ConfigurationError

try:
    from . import _kernels_cy
except ImportError:
    _kernels_cy = None

_BACKENDS = {"numpy": _kernels_np}
if _kernels_cy is not None:
    _BACKENDS["cython"] = _kernels_cy


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ConfigurationError(
            f"kernel backend {name!r} not available (have: {', '.join(available_backends())})"
        ) from None


_forced = os.environ.get("PERTURBENCH_KERNELS", "auto")
if _forced in ("", "auto"):
    _conv = _kernels_np
    _pool = _kernels_cy if _kernels_cy is not None else _kernels_np
    BACKEND = f"auto(conv={_conv.BACKEND_NAME},pool={_pool.BACKEND_NAME})"
else:
    _conv = _pool = get_backend(_forced)
    BACKEND = _conv.BACKEND_NAME

conv2d_forward = _conv.conv2d_forward
conv2d_grad_input = _conv.conv2d_grad_input
conv2d_grad_kernel = _conv.conv2d_grad_kernel
maxpool_forward = _pool.maxpool_forward
maxpool_grad = _pool.maxpool_grad
avgpool_forward = _pool.avgpool_forward
avgpool_grad = _pool.avgpool_grad
