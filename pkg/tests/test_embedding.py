"""PCA against the covariance eigensolver oracle; t-SNE P-matrix contracts."""

import numpy as np
import pytest

from perturbench import embedding
from perturbench.errors import ConfigurationError, DegenerateInputError, InputError


def pairwise(coords):
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


class TestPCA:
    def test_centered_2d_data_embeds_as_rotation(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(30, 2))
        x -= x.mean(axis=0)
        emb = embedding.pca_embed(x, components=2)
        assert np.abs(pairwise(emb.coords) - pairwise(x)).max() < 1e-9

    def test_collinear_points_reconstruct_exactly(self):
        t = np.linspace(-1, 1, 12)[:, None]
        direction = np.array([[1.0, 2.0, -0.5]])
        x = t @ direction + 3.0
        emb = embedding.pca_embed(x, components=1)
        recon = emb.coords @ emb.directions + emb.mean
        assert np.abs(recon - x).max() < 1e-9

    def test_variances_match_covariance_eigensolver(self):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(50, 10)) @ rng.normal(size=(10, 10))
        emb = embedding.pca_embed(x, components=10)
        # independent oracle: eigendecomposition of the 10x10 covariance
        eigvals = np.linalg.eigvalsh(np.cov(x, rowvar=False))[::-1]
        np.testing.assert_allclose(emb.variances, eigvals[:10], atol=1e-8)

    def test_directions_orthonormal_and_variance_sorted(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(40, 6))
        emb = embedding.pca_embed(x, components=4)
        gram = emb.directions @ emb.directions.T
        assert np.abs(gram - np.eye(4)).max() < 1e-9
        assert all(a >= b - 1e-12 for a, b in zip(emb.variances, emb.variances[1:]))

    def test_identical_rows_degenerate(self):
        x = np.ones((5, 3))
        with pytest.raises(DegenerateInputError):
            embedding.pca_embed(x, components=1)

    def test_component_bounds(self):
        x = np.random.default_rng(0).normal(size=(5, 3))
        with pytest.raises(ConfigurationError):
            embedding.pca_embed(x, components=5)
        with pytest.raises(InputError):
            embedding.pca_embed(x[:1], components=1)


def blobs(n_per=20, dims=10, separation=10.0, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n_per, dims))
    b = rng.normal(size=(n_per, dims))
    b[:, 0] += separation
    x = np.vstack([a, b])
    labels = np.array([0] * n_per + [1] * n_per)
    return x, labels


class TestTSNE:
    def test_joint_probabilities_contract(self):
        x, _ = blobs()
        p = embedding.joint_probabilities(x, perplexity=8.0)
        assert (p >= 0).all()
        assert np.abs(p - p.T).max() < 1e-12
        assert abs(p.sum() - 1.0) < 1e-9
        assert np.abs(np.diag(p)).max() == 0.0

    def test_per_point_effective_perplexity(self):
        x, _ = blobs(seed=5)
        d2 = embedding._squared_distances(x)
        cond, _ = embedding.conditional_probabilities(d2, perplexity=9.0)
        for i in range(x.shape[0]):
            row = cond[i][cond[i] > 0]
            entropy = -(row * np.log(row)).sum()
            assert abs(np.exp(entropy) - 9.0) < 1e-3

    def test_two_blob_silhouette(self):
        from sklearn.metrics import silhouette_score

        x, labels = blobs(n_per=20, dims=10, separation=10.0, seed=1)
        emb = embedding.tsne_embed(x, perplexity=8.0, iterations=400, seed=0)
        assert np.isfinite(emb.coords).all()
        assert silhouette_score(emb.coords, labels) > 0.5
        assert emb.kl_divergence is not None and emb.kl_divergence >= 0

    def test_deterministic_given_seed(self):
        x, _ = blobs(seed=2)
        e1 = embedding.tsne_embed(x, perplexity=6.0, iterations=60, seed=3)
        e2 = embedding.tsne_embed(x, perplexity=6.0, iterations=60, seed=3)
        np.testing.assert_array_equal(e1.coords, e2.coords)
        e3 = embedding.tsne_embed(x, perplexity=6.0, iterations=60, seed=4)
        assert np.abs(e1.coords - e3.coords).max() > 0

    def test_infeasible_perplexity(self):
        x, _ = blobs(n_per=6)  # n = 12 -> perplexity cap (n-1)/3 < 4
        with pytest.raises(ConfigurationError, match="perplexity"):
            embedding.tsne_embed(x, perplexity=5.0, iterations=10, seed=0)
        with pytest.raises(ConfigurationError):
            embedding.tsne_embed(x[:4], perplexity=3.0, iterations=10, seed=0)

    def test_identical_rows_degenerate(self):
        x = np.ones((12, 4))
        with pytest.raises(DegenerateInputError):
            embedding.tsne_embed(x, perplexity=3.0, iterations=10, seed=0)

    def test_row_count_preserved(self):
        x, _ = blobs(n_per=12, dims=5, seed=7)
        emb = embedding.tsne_embed(x, perplexity=5.0, iterations=30, seed=0)
        assert emb.coords.shape == (24, 2)
