"""Stratified splitting, momentum-SGD training, accuracy evaluation.

Training minimizes mean softmax cross-entropy (plus weighted auxiliary-head
losses for mini-inception in train mode) with classic momentum updates
v <- mu*v - lr*g, p <- p + v. Everything is deterministic given the seeds:
one PCG64 stream drives the per-epoch shuffles, batches are visited in
order, and gradients accumulate in sample-index order within a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigurationError, InputError, TrainingError

EVAL_BATCH = 64


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    shuffle: bool = True

    def validate(self):
        if self.epochs < 1:
            raise ConfigurationError(f"train.epochs: must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"train.batch_size: must be >= 1, got {self.batch_size}")
        if not self.learning_rate >= 0:
            raise ConfigurationError(
                f"train.learning_rate: must be >= 0, got {self.learning_rate}"
            )
        if not 0 <= self.momentum < 1:
            raise ConfigurationError(
                f"train.momentum: must lie in [0, 1), got {self.momentum}"
            )


@dataclass
class TrainHistory:
    epoch_loss: list = field(default_factory=list)
    epoch_accuracy: list = field(default_factory=list)
    final_test_accuracy: float = None


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split_dataset(dataset, train_fraction, seed):
    """Stratified split: per class, round(fraction * size) records go to
    train (half rounds up), the remainder to test. Deterministic per seed."""
    if len(dataset) == 0:
        raise InputError("split_dataset: dataset is empty")
    if not 0 < train_fraction < 1:
        raise InputError(
            f"split_dataset: train_fraction must lie in (0, 1), got {train_fraction}"
        )
    counts = dataset.per_class_counts()
    for c, n in enumerate(counts):
        if n < 2:
            raise InputError(
                f"split_dataset: class {dataset.class_names[c]!r} has {n} samples (need >= 2)"
            )
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == c)
        order = rng.permutation(len(members))
        n_train = _round_half_up(train_fraction * len(members))
        picked = members[order]
        train_idx.extend(picked[:n_train])
        test_idx.extend(picked[n_train:])
    return dataset.subset(sorted(train_idx)), dataset.subset(sorted(test_idx))


def train_sgd(model, train, config):
    """Momentum SGD over mini-batches; returns the per-epoch history.

    epoch_accuracy is the running accuracy over that epoch's training
    batches (predictions taken as the batches are visited).
    """
    config.validate()
    if len(train) == 0:
        raise InputError("train_sgd: training set is empty")
    if tuple(train.images.shape[1:]) != model.config.input_shape:
        raise InputError(
            f"train_sgd: dataset images {train.images.shape[1:]} do not match "
            f"model input {model.config.input_shape}"
        )
    rng = np.random.default_rng(config.seed)
    velocity = {name: np.zeros_like(p.data) for name, p in model.params.items()}
    history = TrainHistory()
    n = len(train)
    prev_mode = model.mode
    model.train_mode()
    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n) if config.shuffle else np.arange(n)
            loss_sum = 0.0
            correct = 0
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                xb = Tensor(train.images[idx])
                yb = train.labels[idx]
                out = model.forward(xb, train=True)
                loss, probs = ag.softmax_cross_entropy(out.logits, yb)
                total = loss
                for aux in out.aux_logits:
                    aux_loss, _ = ag.softmax_cross_entropy(aux, yb)
                    total = ag.residual_add(total, ag.scale(aux_loss, model.config.aux_loss_weight))
                batch_loss = float(loss.data)
                if not math.isfinite(batch_loss):
                    raise TrainingError(f"loss diverged to {batch_loss} in epoch {epoch}")
                loss_sum += batch_loss * len(idx)
                correct += int((probs.argmax(axis=1) == yb).sum())
                model.zero_grad()
                ag.backward(total)
                for name, p in model.params.items():
                    v = velocity[name]
                    v *= config.momentum
                    v -= config.learning_rate * p.grad
                    p.data += v
            history.epoch_loss.append(loss_sum / n)
            history.epoch_accuracy.append(correct / n)
    finally:
        model.mode = prev_mode
    return history


def evaluate_accuracy(model, dataset):
    """Fraction of records whose predicted class equals the label."""
    if len(dataset) == 0:
        raise InputError("evaluate_accuracy: dataset is empty")
    from .models import predict_batch

    correct = 0
    for start in range(0, len(dataset), EVAL_BATCH):
        images = dataset.images[start : start + EVAL_BATCH]
        preds, _ = predict_batch(model, images)
        correct += int((preds == dataset.labels[start : start + EVAL_BATCH]).sum())
    return correct / len(dataset)
