"""Feature extraction, cluster centers, attack selectivity, and the shape
of the adversarial misclassification distribution.

Selectivity joins each source class's adversarial target histogram with its
nearest other classes in the embedding (L2 between per-class centers): the
top-k coverage says how often a successful attack lands on a geometric
neighbour, against the chance baseline k/(K-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DegenerateInputError, InputError
from .models import features_batch
from .training import EVAL_BATCH


@dataclass
class FeatureMatrix:
    rows: np.ndarray  # [n, D]
    labels: np.ndarray  # [n]

    def __post_init__(self):
        if self.rows.ndim != 2 or len(self.rows) != len(self.labels):
            raise InputError(
                f"feature matrix rows {self.rows.shape} inconsistent with "
                f"{len(self.labels)} labels"
            )


@dataclass
class ClassCenters:
    centers: np.ndarray  # [K, d]
    distances: np.ndarray  # [K, K] symmetric L2 matrix
    num_classes: int


@dataclass
class ClassSelectivity:
    source: int
    nearest: list  # [(class, distance)] ascending, length k
    target_counts: dict  # target class -> successful attacks from this source
    coverage: float  # fraction of those landing in `nearest`


@dataclass
class SelectivityReport:
    per_class: list  # ClassSelectivity for classes with >= 1 success
    k: int
    num_classes: int
    aggregate_coverage: float  # None when the campaign had no successes
    chance_baseline: float


@dataclass
class MisclassDistribution:
    counts: np.ndarray  # successful adversarial examples per target class
    normalized_entropy: float  # None when degenerate
    gini: float  # None when degenerate
    degenerate: bool


def extract_features(model, dataset):
    """Penultimate feature vector per record, label order preserved."""
    if len(dataset) == 0:
        raise InputError("extract_features: dataset is empty")
    chunks = [
        features_batch(model, dataset.images[start : start + EVAL_BATCH])
        for start in range(0, len(dataset), EVAL_BATCH)
    ]
    return FeatureMatrix(np.vstack(chunks), dataset.labels.copy())


def class_centers(coords, labels, num_classes=None):
    """Per-class arithmetic mean plus the full pairwise L2 distance matrix."""
    coords = np.asarray(coords, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if coords.ndim != 2 or len(coords) != len(labels):
        raise InputError("class_centers: coords/labels are inconsistent")
    k = int(num_classes) if num_classes is not None else int(labels.max()) + 1
    centers = np.zeros((k, coords.shape[1]))
    for c in range(k):
        members = coords[labels == c]
        if len(members) == 0:
            raise InputError(f"class_centers: class {c} has no points")
        centers[c] = members.mean(axis=0)
    diff = centers[:, None, :] - centers[None, :, :]
    distances = np.sqrt((diff * diff).sum(axis=2))
    return ClassCenters(centers, distances, k)


def nearest_classes(centers, source, k):
    """The k other classes closest to `source`, ascending; ties by index."""
    total = centers.num_classes
    if not 0 <= source < total:
        raise InputError(f"nearest_classes: source {source} out of range [0, {total})")
    if not 1 <= k <= total - 1:
        raise InputError(f"nearest_classes: k must lie in [1, {total - 1}], got {k}")
    others = [c for c in range(total) if c != source]
    ranked = sorted(others, key=lambda c: (centers.distances[source, c], c))
    return [(c, float(centers.distances[source, c])) for c in ranked[:k]]


def selectivity_report(campaign, centers, k):
    """Join adversarial target histograms with nearest-center rankings."""
    if centers.num_classes != campaign.num_classes:
        raise InputError(
            f"selectivity_report: campaign has {campaign.num_classes} classes, "
            f"centers have {centers.num_classes}"
        )
    num_classes = campaign.num_classes
    per_source = {}
    for (source, target), count in campaign.pair_counts.items():
        per_source.setdefault(source, {})[target] = count
    per_class = []
    covered_total = 0
    success_total = 0
    for source in sorted(per_source):
        targets = per_source[source]
        ranked = nearest_classes(centers, source, k)
        near = {c for c, _ in ranked}
        successes = sum(targets.values())
        covered = sum(n for t, n in targets.items() if t in near)
        per_class.append(
            ClassSelectivity(
                source=source,
                nearest=ranked,
                target_counts=dict(sorted(targets.items())),
                coverage=covered / successes,
            )
        )
        covered_total += covered
        success_total += successes
    return SelectivityReport(
        per_class=per_class,
        k=k,
        num_classes=num_classes,
        aggregate_coverage=covered_total / success_total if success_total else None,
        chance_baseline=k / (num_classes - 1),
    )


def normalized_entropy(counts):
    """H(counts)/ln(K) in [0, 1]; exact at the uniform and single-support
    extremes, which float accumulation alone cannot guarantee."""
    counts = np.asarray(counts)
    k = len(counts)
    total = int(counts.sum())
    if total <= 0 or k < 2:
        raise InputError("normalized_entropy: need a non-empty histogram with K >= 2")
    positive = counts[counts > 0]
    if len(positive) == 1:
        return 0.0
    if len(positive) == k and np.all(counts == counts[0]):
        return 1.0
    p = positive / total
    h = float(-(p * np.log(p)).sum())
    return min(max(h / math.log(k), 0.0), 1.0)


def gini_coefficient(counts):
    """Mean absolute difference Gini of the count vector, in [0, (K-1)/K].

    Integer pairwise sums plus one float division keep the extremes exact:
    a single-support histogram gives exactly (K-1)/K, a uniform one 0.0.
    """
    counts = [int(c) for c in counts]
    k = len(counts)
    total = sum(counts)
    if total <= 0 or k < 2:
        raise InputError("gini_coefficient: need a non-empty histogram with K >= 2")
    pair_sum = sum(abs(a - b) for a in counts for b in counts)
    return pair_sum / (2 * k * total)


def misclass_distribution(campaign):
    """Histogram of successful adversarial examples by (wrong) target class,
    with entropy/Gini concentration statistics."""
    counts = campaign.target_counts()
    if counts.sum() == 0:
        return MisclassDistribution(counts, None, None, True)
    return MisclassDistribution(
        counts=counts,
        normalized_entropy=normalized_entropy(counts),
        gini=gini_coefficient(counts),
        degenerate=False,
    )
