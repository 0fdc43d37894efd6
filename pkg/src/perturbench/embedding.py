"""Low-dimensional embeddings of feature matrices: PCA and exact t-SNE.

The t-SNE here is the exact O(n^2) formulation: per-point Gaussian
bandwidths found by binary search so each conditional distribution hits the
requested perplexity, symmetrized joint probabilities summing to one,
Student-t low-dimensional affinities, and momentum gradient descent with
early exaggeration from a PCA initialization. Small n only, by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, InputError

EPS = np.finfo(np.float64).tiny


@dataclass
class Embedding2D:
    coords: np.ndarray  # [n, k]
    method: str  # "pca" | "tsne"
    params: dict
    kl_divergence: float = None  # tsne only
    directions: np.ndarray = None  # pca only: [k, D] orthonormal rows
    variances: np.ndarray = None  # pca only: projected variance per component
    mean: np.ndarray = None  # pca only: the removed feature mean


def _as_matrix(features):
    rows = getattr(features, "rows", features)
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise InputError(f"expected a 2-d feature matrix, got shape {rows.shape}")
    return rows


def pca_embed(features, components=2):
    """Mean-centered projection onto the top principal directions.

    Directions come from the SVD of the centered data; projected variances
    use the 1/(n-1) convention so they match covariance eigenvalues. Signs
    are fixed so each direction's largest-magnitude loading is positive.
    """
    x = _as_matrix(features)
    n, d = x.shape
    if n < 2:
        raise InputError(f"pca_embed: need at least 2 rows, got {n}")
    if not 1 <= components <= min(n - 1, d):
        raise ConfigurationError(
            f"analysis.pca_components: must lie in [1, min(n-1, D)] = "
            f"[1, {min(n - 1, d)}], got {components}"
        )
    mean = x.mean(axis=0)
    centered = x - mean
    if not centered.any():
        raise DegenerateInputError("pca_embed: all rows are identical")
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    directions = vt[:components]
    # deterministic sign: largest |loading| of each direction positive
    for row in directions:
        peak = np.argmax(np.abs(row))
        if row[peak] < 0:
            row *= -1.0
    coords = centered @ directions.T
    variances = (s[:components] ** 2) / (n - 1)
    return Embedding2D(
        coords=coords,
        method="pca",
        params={"components": components},
        directions=directions,
        variances=variances,
        mean=mean,
    )


def _squared_distances(x):
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def conditional_probabilities(d2, perplexity, tol=1e-8, max_iter=200):
    """Per-point Gaussian conditionals matching the target perplexity.

    Binary-searches each point's precision beta so the entropy of its
    conditional distribution equals log(perplexity) within tol. Returns the
    row-normalized conditional matrix (zero diagonal) and the betas.
    """
    n = d2.shape[0]
    target = math.log(perplexity)
    p = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        di = np.delete(d2[i], i)
        beta, lo, hi = 1.0, 0.0, math.inf
        for _ in range(max_iter):
            w = np.exp(-di * beta)
            total = w.sum()
            if total <= 0:
                entropy = 0.0
            else:
                w /= total
                nz = w > 0
                entropy = float(-(w[nz] * np.log(w[nz])).sum())
            diff = entropy - target
            if abs(diff) <= tol:
                break
            if diff > 0:  # too spread out: sharpen
                lo = beta
                beta = beta * 2.0 if hi == math.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
        row = np.exp(-d2[i] * beta)
        row[i] = 0.0
        total = row.sum()
        if total <= 0:
            raise DegenerateInputError(
                f"tsne_embed: point {i} has no finite-bandwidth neighbours"
            )
        p[i] = row / total
        betas[i] = beta
    return p, betas


def joint_probabilities(features, perplexity):
    """Symmetrized t-SNE affinities: non-negative, symmetric, sum to 1."""
    x = _as_matrix(features)
    cond, _ = conditional_probabilities(_squared_distances(x), perplexity)
    return (cond + cond.T) / (2.0 * x.shape[0])


def tsne_embed(
    features,
    perplexity=15.0,
    iterations=500,
    seed=0,
    learning_rate=100.0,
    early_exaggeration=12.0,
    exaggeration_iters=100,
    momentum_switch=250,
):
    """Exact t-SNE to 2 dimensions; deterministic given the seed."""
    x = _as_matrix(features)
    n = x.shape[0]
    if n < 10:
        raise ConfigurationError(f"analysis.tsne: need at least 10 rows, got {n}")
    if not 3 <= perplexity <= (n - 1) / 3:
        raise ConfigurationError(
            f"analysis.perplexity: must lie in [3, (n-1)/3] = [3, {(n - 1) / 3:.2f}] "
            f"for n={n}, got {perplexity}"
        )
    if iterations < 1:
        raise ConfigurationError(f"analysis.tsne_iterations: must be >= 1, got {iterations}")
    if np.all(x == x[0]):
        raise DegenerateInputError("tsne_embed: all rows are identical")

    p = joint_probabilities(x, perplexity)

    # PCA init scaled to 1e-4 std, plus a seeded jitter that separates any
    # exactly coincident starting points and makes the seed meaningful
    init = pca_embed(x, components=2).coords
    spread = init[:, 0].std()
    if spread > 0:
        init = init * (1e-4 / spread)
    rng = np.random.default_rng(seed)
    y = init + rng.standard_normal(init.shape) * 1e-8

    update = np.zeros_like(y)
    for it in range(iterations):
        affin = p * early_exaggeration if it < exaggeration_iters else p
        d2y = _squared_distances(y)
        num = 1.0 / (1.0 + d2y)
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), EPS)
        w = (affin - q) * num
        grad = 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)
        momentum = 0.5 if it < momentum_switch else 0.8
        update = momentum * update - learning_rate * grad
        y = y + update
        y = y - y.mean(axis=0)

    d2y = _squared_distances(y)
    num = 1.0 / (1.0 + d2y)
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), EPS)
    mask = p > 0
    kl = float((p[mask] * np.log(p[mask] / q[mask])).sum())
    return Embedding2D(
        coords=y,
        method="tsne",
        params={"perplexity": perplexity, "iterations": iterations, "seed": seed},
        kl_divergence=kl,
    )
