"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records its step on the output node: parent links plus an
adjoint closure holding whatever activations the backward rule needs. The
recorded computation is therefore an implicit tape, topologically ordered by
construction. ``backward`` replays the adjoints exactly once per node in
reverse topological order and then consumes the record, so a second backward
through the same graph raises a state error.

Convolution follows the cross-correlation convention (no kernel flip). The
ReLU subgradient at 0 is 0; max-pool ties route the adjoint to the first
maximum in row-major window order.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ConfigurationError, DimensionError, InputError, StateError


class Tensor:
    """N-dimensional float64 array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_adjoint")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)  # keeps 0-d scalars 0-d
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._adjoint = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _result(data, parents, adjoint):
    out = Tensor(data)
    out._parents = parents
    out._adjoint = adjoint
    return out


def _wants_grad(t):
    # leaves only need a gradient if asked for; interior nodes always do
    return t.requires_grad or t._adjoint is not None


def _accumulate(t, delta):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += delta


def _require_4d(x, op):
    if x.data.ndim != 4:
        raise DimensionError(f"{op}: expected a 4-d [N,C,H,W] input, got shape {x.data.shape}")


def conv2d(x, kernel, bias, stride=1, padding=0):
    """Cross-correlate [N,C,H,W] with [K,C,kh,kw] kernels plus per-channel bias."""
    _require_4d(x, "conv2d")
    if kernel.data.ndim != 4:
        raise DimensionError(f"conv2d: kernel must be 4-d [K,C,kh,kw], got {kernel.data.shape}")
    if stride < 1:
        raise ConfigurationError(f"conv2d: stride must be >= 1, got {stride}")
    if padding < 0:
        raise ConfigurationError(f"conv2d: padding must be >= 0, got {padding}")
    n, c, h, w = x.data.shape
    k, ck, kh, kw = kernel.data.shape
    if ck != c:
        raise DimensionError(
            f"conv2d: kernel expects {ck} input channels on axis 1, input has {c}"
        )
    if bias.data.shape != (k,):
        raise DimensionError(f"conv2d: bias must have shape ({k},), got {bias.data.shape}")
    for name, size, ksize in (("height", h, kh), ("width", w, kw)):
        span = size + 2 * padding - ksize
        if span < 0 or span % stride != 0:
            raise ConfigurationError(
                f"conv2d: output {name} (({size} + 2*{padding} - {ksize}) / {stride} + 1)"
                " is not a positive integer"
            )
    y = kernels.conv2d_forward(x.data, kernel.data, stride, padding)
    y += bias.data[None, :, None, None]
    xd, kd = x.data, kernel.data

    def adjoint(gy):
        if _wants_grad(x):
            _accumulate(x, kernels.conv2d_grad_input(gy, kd, h, w, stride, padding))
        if _wants_grad(kernel):
            _accumulate(kernel, kernels.conv2d_grad_kernel(gy, xd, kh, kw, stride, padding))
        if _wants_grad(bias):
            _accumulate(bias, gy.sum(axis=(0, 2, 3)))

    return _result(y, (x, kernel, bias), adjoint)


def pool2d(x, mode, window, stride):
    """Max or average pooling with a square window."""
    _require_4d(x, "pool2d")
    if mode not in ("max", "average"):
        raise ConfigurationError(f"pool2d: mode must be 'max' or 'average', got {mode!r}")
    if window < 1 or stride < 1:
        raise ConfigurationError(f"pool2d: window and stride must be >= 1")
    n, c, h, w = x.data.shape
    if window > h or window > w:
        raise ConfigurationError(
            f"pool2d: window {window} larger than spatial extent {h}x{w}"
        )
    if mode == "max":
        y, idx = kernels.maxpool_forward(x.data, window, stride)

        def adjoint(gy):
            if _wants_grad(x):
                _accumulate(x, kernels.maxpool_grad(gy, idx, h, w))

    else:
        y = kernels.avgpool_forward(x.data, window, stride)

        def adjoint(gy):
            if _wants_grad(x):
                _accumulate(x, kernels.avgpool_grad(gy, h, w, window, stride))

    return _result(y, (x,), adjoint)


def global_avg_pool(x):
    """Per-channel spatial mean: [N,C,H,W] -> [N,C]."""
    _require_4d(x, "global_avg_pool")
    n, c, h, w = x.data.shape
    y = x.data.mean(axis=(2, 3))

    def adjoint(gy):
        if _wants_grad(x):
            _accumulate(x, np.broadcast_to(gy[:, :, None, None] / (h * w), x.data.shape))

    return _result(y, (x,), adjoint)


def dense_affine(x, weight, bias):
    """x @ weight + bias for [N,D] inputs."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise DimensionError(
            f"dense_affine: expected 2-d input and weight, got {x.data.shape} and {weight.data.shape}"
        )
    n, d = x.data.shape
    dw, m = weight.data.shape
    if d != dw:
        raise DimensionError(
            f"dense_affine: input inner extent {d} does not match weight rows {dw}"
        )
    if bias.data.shape != (m,):
        raise DimensionError(f"dense_affine: bias must have shape ({m},), got {bias.data.shape}")
    y = x.data @ weight.data + bias.data
    xd, wd = x.data, weight.data

    def adjoint(gy):
        if _wants_grad(x):
            _accumulate(x, gy @ wd.T)
        if _wants_grad(weight):
            _accumulate(weight, xd.T @ gy)
        if _wants_grad(bias):
            _accumulate(bias, gy.sum(axis=0))

    return _result(y, (x, weight, bias), adjoint)


def relu(x):
    """Elementwise max(0, x); subgradient at 0 is 0."""
    mask = x.data > 0
    y = np.where(mask, x.data, 0.0)

    def adjoint(gy):
        if _wants_grad(x):
            _accumulate(x, gy * mask)

    return _result(y, (x,), adjoint)


def branch_concat(inputs):
    """Concatenate [N,Ci,H,W] maps along the channel axis, in argument order."""
    if not inputs:
        raise InputError("branch_concat: need at least one input")
    for t in inputs:
        _require_4d(t, "branch_concat")
    first = inputs[0].data.shape
    for t in inputs[1:]:
        s = t.data.shape
        if (s[0], s[2], s[3]) != (first[0], first[2], first[3]):
            raise DimensionError(
                f"branch_concat: batch/spatial axes differ ({first} vs {s})"
            )
    y = np.concatenate([t.data for t in inputs], axis=1)
    widths = [t.data.shape[1] for t in inputs]
    offsets = np.cumsum([0] + widths)

    def adjoint(gy):
        for t, lo, hi in zip(inputs, offsets[:-1], offsets[1:]):
            if _wants_grad(t):
                _accumulate(t, gy[:, lo:hi])

    return _result(y, tuple(inputs), adjoint)


def residual_add(x, fx):
    """Elementwise sum of identically shaped tensors (shortcut connection)."""
    if x.data.shape != fx.data.shape:
        raise DimensionError(
            f"residual_add: shapes {x.data.shape} and {fx.data.shape} differ"
        )
    y = x.data + fx.data

    def adjoint(gy):
        if _wants_grad(x):
            _accumulate(x, gy)
        if _wants_grad(fx):
            _accumulate(fx, gy)

    return _result(y, (x, fx), adjoint)


def flatten(x):
    """[N, ...] -> [N, prod(rest)]."""
    n = x.data.shape[0]
    y = x.data.reshape(n, -1)
    shape = x.data.shape

    def adjoint(gy):
        if _wants_grad(x):
            _accumulate(x, gy.reshape(shape))

    return _result(y, (x,), adjoint)


def scale(x, factor):
    """Multiply by a python scalar constant."""
    y = x.data * float(factor)

    def adjoint(gy):
        if _wants_grad(x):
            _accumulate(x, gy * float(factor))

    return _result(y, (x,), adjoint)


def sum_all(x):
    """Sum of every element, as a scalar node."""
    y = x.data.sum()

    def adjoint(gy):
        if _wants_grad(x):
            _accumulate(x, np.broadcast_to(gy, x.data.shape))

    return _result(y, (x,), adjoint)


def softmax_probs(logits):
    """Row-stabilized softmax of a plain [N,K] array (no graph)."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch.

    Returns (scalar loss Tensor, [N,K] probability array). The softmax is
    stabilized by row-max subtraction, so huge logits cannot overflow.
    """
    if logits.data.ndim != 2:
        raise DimensionError(f"softmax_cross_entropy: logits must be [N,K], got {logits.data.shape}")
    n, k = logits.data.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise DimensionError(
            f"softmax_cross_entropy: expected {n} labels, got shape {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise InputError(f"softmax_cross_entropy: labels must lie in [0, {k})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    probs = np.exp(z - logsumexp[:, None])
    loss = float(np.mean(logsumexp - z[np.arange(n), labels]))

    def adjoint(gy):
        if _wants_grad(logits):
            g = probs.copy()
            g[np.arange(n), labels] -= 1.0
            _accumulate(logits, g * (float(gy) / n))

    return _result(loss, (logits,), adjoint), probs


def _toposort(root):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss):
    """Reverse sweep from a scalar loss; fills ``grad`` along the record.

    Consumes the record: parent links and adjoints are dropped as they run,
    so calling backward twice on the same graph raises a StateError.
    """
    if loss._adjoint is None and not loss._parents:
        raise StateError("backward: no recorded forward pass to differentiate")
    if loss.data.size != 1:
        raise StateError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    order = _toposort(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        fn = node._adjoint
        if fn is not None:
            fn(node.grad)
        node._adjoint = None
        node._parents = ()
