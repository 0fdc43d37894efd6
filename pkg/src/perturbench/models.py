"""Model zoo: three small CNN families with shared forward machinery.

- ``plain``: alternating conv/max-pool stages, flatten, one dense classifier.
- ``mini-inception``: stem conv, multi-branch modules (1x1 + 3x3 branches,
  channel-concatenated), global average pooling, optional auxiliary
  classifier heads that contribute to the loss in train mode only.
- ``mini-resnet``: stem conv, shortcut blocks (two 3x3 convs added back onto
  the input), global average pooling.

All convolutions are 3x3/pad-1 except the 1x1 inception branches; spatial
downsampling is 2x2 max pooling. Weights initialize uniform in [-s, s] with
s = sqrt(6 / (fan_in + fan_out)); biases start at zero. Building twice from
the same (config, seed) reproduces parameters bitwise.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigurationError, InputError

FAMILIES = ("plain", "mini-inception", "mini-resnet")


@dataclass(frozen=True)
class ModelConfig:
    family: str
    input_shape: tuple = (3, 32, 32)
    num_classes: int = 10
    stage_widths: tuple = (16, 32)
    num_modules: int = 2
    aux_positions: tuple = ()
    aux_loss_weight: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "stage_widths", tuple(self.stage_widths))
        object.__setattr__(self, "aux_positions", tuple(self.aux_positions))

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"model.family: {self.family!r} is not one of {', '.join(FAMILIES)}"
            )
        if len(self.input_shape) != 3 or any(int(v) < 1 for v in self.input_shape):
            raise ConfigurationError(
                f"model.input_shape: need three positive extents (C,H,W), got {self.input_shape}"
            )
        if self.num_classes < 2:
            raise ConfigurationError(f"model.num_classes: must be >= 2, got {self.num_classes}")
        if not self.stage_widths or any(int(w) < 1 for w in self.stage_widths):
            raise ConfigurationError(
                f"model.stage_widths: every width must be >= 1, got {self.stage_widths}"
            )
        if self.num_modules < 1:
            raise ConfigurationError(f"model.num_modules: must be >= 1, got {self.num_modules}")
        if self.family == "plain":
            if len(self.stage_widths) != self.num_modules:
                raise ConfigurationError(
                    "model.stage_widths: plain family needs one width per conv/pool stage "
                    f"({self.num_modules}), got {len(self.stage_widths)}"
                )
            pools = self.num_modules
        elif self.family == "mini-inception":
            if len(self.stage_widths) != self.num_modules + 1:
                raise ConfigurationError(
                    "model.stage_widths: mini-inception needs stem width plus one width per "
                    f"module ({self.num_modules + 1} values), got {len(self.stage_widths)}"
                )
            if any(w < 2 for w in self.stage_widths[1:]):
                raise ConfigurationError(
                    "model.stage_widths: inception module widths must be >= 2 to split "
                    "across the 1x1 and 3x3 branches"
                )
            pools = self.num_modules  # stem pool + one between consecutive modules
        else:
            if len(self.stage_widths) != 1:
                raise ConfigurationError(
                    "model.stage_widths: mini-resnet uses a single shared width, got "
                    f"{len(self.stage_widths)} values"
                )
            pools = 1
        if self.aux_positions:
            if self.family != "mini-inception":
                raise ConfigurationError(
                    "model.aux_positions: auxiliary heads exist only in the mini-inception family"
                )
            for p in self.aux_positions:
                if not 1 <= int(p) <= self.num_modules:
                    raise ConfigurationError(
                        f"model.aux_positions: position {p} does not reference an existing "
                        f"module (1..{self.num_modules})"
                    )
        if self.aux_loss_weight < 0:
            raise ConfigurationError(
                f"model.aux_loss_weight: must be >= 0, got {self.aux_loss_weight}"
            )
        _, h, w = self.input_shape
        if min(h, w) < 2**pools:
            raise ConfigurationError(
                f"model.input_shape: spatial extent {h}x{w} too small for {pools} pooling stages"
            )


def default_config(family, num_classes=10, input_shape=(3, 32, 32)):
    """Desk-scale defaults per family."""
    if family == "plain":
        return ModelConfig(family, input_shape, num_classes, (16, 32), 2)
    if family == "mini-inception":
        return ModelConfig(family, input_shape, num_classes, (8, 16, 16), 2, (1,))
    if family == "mini-resnet":
        return ModelConfig(family, input_shape, num_classes, (16,), 3)
    raise ConfigurationError(f"model.family: unknown family {family!r}")


@dataclass
class ForwardPass:
    logits: Tensor
    features: Tensor
    aux_logits: list = field(default_factory=list)


class Model:
    """A built network: config plus named ordered parameters."""

    def __init__(self, config, params):
        self.config = config
        self.params = params  # insertion-ordered name -> Tensor
        self.mode = "eval"

    def train_mode(self):
        self.mode = "train"
        return self

    def eval_mode(self):
        self.mode = "eval"
        return self

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def parameter_count(self):
        return sum(p.data.size for p in self.params.values())

    def forward(self, x, train=None):
        """Run the network on a [N,C,H,W] batch tensor."""
        if train is None:
            train = self.mode == "train"
        if x.data.ndim != 4 or tuple(x.data.shape[1:]) != self.config.input_shape:
            raise InputError(
                f"forward: expected batch of shape [N,{','.join(map(str, self.config.input_shape))}], "
                f"got {tuple(x.data.shape)}"
            )
        if self.config.family == "plain":
            return self._forward_plain(x)
        if self.config.family == "mini-inception":
            return self._forward_inception(x, train)
        return self._forward_resnet(x)

    def _conv(self, x, name, padding):
        return ag.conv2d(x, self.params[f"{name}.W"], self.params[f"{name}.b"], 1, padding)

    def _dense(self, x, name):
        return ag.dense_affine(x, self.params[f"{name}.W"], self.params[f"{name}.b"])

    def _forward_plain(self, x):
        for i in range(1, self.config.num_modules + 1):
            x = ag.relu(self._conv(x, f"conv{i}", padding=1))
            x = ag.pool2d(x, "max", 2, 2)
        feats = ag.flatten(x)
        return ForwardPass(self._dense(feats, "fc"), feats)

    def _inception_module(self, x, i):
        b1 = ag.relu(self._conv(x, f"mod{i}.b1", padding=0))
        b3 = ag.relu(self._conv(x, f"mod{i}.b3", padding=1))
        return ag.branch_concat([b1, b3])

    def _forward_inception(self, x, train):
        cfg = self.config
        x = ag.relu(self._conv(x, "stem", padding=1))
        x = ag.pool2d(x, "max", 2, 2)
        aux_logits = []
        for i in range(1, cfg.num_modules + 1):
            x = self._inception_module(x, i)
            if train and i in cfg.aux_positions:
                aux_logits.append(self._dense(ag.global_avg_pool(x), f"aux{i}"))
            if i < cfg.num_modules:
                x = ag.pool2d(x, "max", 2, 2)
        feats = ag.global_avg_pool(x)
        return ForwardPass(self._dense(feats, "fc"), feats, aux_logits)

    def _forward_resnet(self, x):
        x = ag.relu(self._conv(x, "stem", padding=1))
        x = ag.pool2d(x, "max", 2, 2)
        for i in range(1, self.config.num_modules + 1):
            inner = ag.relu(self._conv(x, f"block{i}.c1", padding=1))
            branch = self._conv(inner, f"block{i}.c2", padding=1)
            x = ag.relu(ag.residual_add(x, branch))
        feats = ag.global_avg_pool(x)
        return ForwardPass(self._dense(feats, "fc"), feats)

    def feature_width(self):
        """Length of the penultimate feature vector (pure function of config)."""
        cfg = self.config
        c, h, w = cfg.input_shape
        if cfg.family == "plain":
            for _ in range(cfg.num_modules):
                h, w = h // 2, w // 2
            return cfg.stage_widths[-1] * h * w
        return cfg.stage_widths[-1]


def _glorot(rng, shape, fan_in, fan_out):
    s = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, shape)


def _param_specs(config):
    """Ordered (name, shape, kind) for every parameter; kind drives init."""
    c, h, w = config.input_shape
    k = config.num_classes
    specs = []

    def conv(name, cin, cout, ksize):
        specs.append((f"{name}.W", (cout, cin, ksize, ksize), "conv"))
        specs.append((f"{name}.b", (cout,), "bias"))

    def dense(name, din, dout):
        specs.append((f"{name}.W", (din, dout), "dense"))
        specs.append((f"{name}.b", (dout,), "bias"))

    if config.family == "plain":
        cin = c
        for i, width in enumerate(config.stage_widths, start=1):
            conv(f"conv{i}", cin, width, 3)
            cin = width
            h, w = h // 2, w // 2
        dense("fc", cin * h * w, k)
    elif config.family == "mini-inception":
        stem = config.stage_widths[0]
        conv("stem", c, stem, 3)
        cin = stem
        for i, width in enumerate(config.stage_widths[1:], start=1):
            b1 = width // 2
            conv(f"mod{i}.b1", cin, b1, 1)
            conv(f"mod{i}.b3", cin, width - b1, 3)
            cin = width
            if i in config.aux_positions:
                dense(f"aux{i}", cin, k)
        dense("fc", cin, k)
    else:
        width = config.stage_widths[0]
        conv("stem", c, width, 3)
        for i in range(1, config.num_modules + 1):
            conv(f"block{i}.c1", width, width, 3)
            conv(f"block{i}.c2", width, width, 3)
        dense("fc", width, k)
    return specs


def build_model(config, seed):
    """Construct a model with seeded initialization.

    Identical (config, seed) pairs produce bitwise-identical parameters:
    draws happen in fixed parameter order from a single PCG64 stream.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape, kind in _param_specs(config):
        if kind == "bias":
            data = np.zeros(shape)
        elif kind == "conv":
            cout, cin, kh, kw = shape
            data = _glorot(rng, shape, cin * kh * kw, cout * kh * kw)
        else:
            din, dout = shape
            data = _glorot(rng, shape, din, dout)
        params[name] = Tensor(data, requires_grad=True)
    return Model(config, params)


def _as_batch(image, config):
    arr = np.asarray(image, dtype=np.float64)
    if arr.shape != config.input_shape:
        raise InputError(
            f"image shape {arr.shape} does not match model input {config.input_shape}"
        )
    return Tensor(arr[None])


def forward_infer(model, image):
    """Classify one [C,H,W] image: (predicted class, confidence, logits).

    Eval-mode path (auxiliary heads off). Confidence is the max softmax
    probability; exact ties resolve to the lowest class index.
    """
    out = model.forward(_as_batch(image, model.config), train=False)
    logits = out.logits.data[0]
    probs = ag.softmax_probs(logits[None])[0]
    pred = int(np.argmax(probs))
    return pred, float(probs[pred]), logits.copy()


def penultimate_features(model, image):
    """The activation vector feeding the final classifier layer."""
    out = model.forward(_as_batch(image, model.config), train=False)
    return out.features.data[0].copy()


def predict_batch(model, images):
    """(predicted classes, confidences) for an [n,C,H,W] stack, eval mode."""
    out = model.forward(Tensor(images), train=False)
    probs = ag.softmax_probs(out.logits.data)
    preds = probs.argmax(axis=1)
    return preds.astype(np.int64), probs[np.arange(len(preds)), preds]


def features_batch(model, images):
    """Penultimate features for an [n,C,H,W] stack, eval mode."""
    return model.forward(Tensor(images), train=False).features.data.copy()


def input_gradient(model, image, label):
    """d(cross-entropy loss)/d(image) with parameters held fixed."""
    x = Tensor(np.asarray(image, dtype=np.float64)[None], requires_grad=True)
    if x.data.shape[1:] != model.config.input_shape:
        raise InputError(
            f"image shape {x.data.shape[1:]} does not match model input {model.config.input_shape}"
        )
    out = model.forward(x, train=False)
    loss, _ = ag.softmax_cross_entropy(out.logits, [int(label)])
    ag.backward(loss)
    grad = x.grad[0].copy()
    # parameter grads from this pass are scratch; clear so training never
    # sees stale contributions
    for p in model.params.values():
        p.grad = None
    return grad


def parameter_digest(model):
    """SHA-256 over parameter names and exact float64 payloads."""
    h = hashlib.sha256()
    for name, p in model.params.items():
        h.update(name.encode())
        h.update(np.ascontiguousarray(p.data).tobytes())
    return h.hexdigest()
