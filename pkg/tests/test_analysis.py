"""Feature extraction, centers, nearest-class ranking, selectivity, shape stats."""

import numpy as np
import pytest

from perturbench import analysis, attacks, data, models
from perturbench.errors import InputError


def make_campaign(pair_counts, num_classes, attacked=None):
    """CampaignResult stub carrying just what the analyses consume."""
    misclassified = sum(pair_counts.values())
    attacked = attacked if attacked is not None else max(misclassified, 1)
    return attacks.CampaignResult(
        config=attacks.AttackConfig("fgsm", 0.05),
        records=[],
        attacked=attacked,
        misclassified=misclassified,
        fooling_rate=attacks.fooling_rate(misclassified, attacked),
        degenerate=attacked == 0,
        pair_counts=dict(pair_counts),
        num_classes=num_classes,
    )


class TestExtractFeatures:
    def setup_method(self):
        cfg = models.ModelConfig("mini-resnet", (3, 16, 16), 3, (6,), 2)
        self.model = models.build_model(cfg, seed=0)
        spec = data.SynthSpec(num_classes=3, images_per_class=3, image_size=16, seed=1)
        self.dataset = data.generate_synthetic(spec)

    def test_single_image_gives_1xD(self):
        fm = analysis.extract_features(self.model, self.dataset.subset([0]))
        assert fm.rows.shape == (1, self.model.feature_width())

    def test_duplicate_images_identical_rows(self):
        ds = self.dataset.subset([0, 0, 1])
        fm = analysis.extract_features(self.model, ds)
        np.testing.assert_array_equal(fm.rows[0], fm.rows[1])

    def test_label_order_preserved(self):
        fm = analysis.extract_features(self.model, self.dataset)
        np.testing.assert_array_equal(fm.labels, self.dataset.labels)

    def test_empty_dataset(self):
        with pytest.raises(InputError):
            analysis.extract_features(self.model, self.dataset.subset([]))


class TestClassCenters:
    def test_single_point_per_class(self):
        coords = np.array([[0.0, 0.0], [3.0, 4.0]])
        cc = analysis.class_centers(coords, [0, 1])
        np.testing.assert_array_equal(cc.centers, coords)
        assert cc.distances[0, 1] == 5.0

    def test_mean_of_two_points(self):
        cc = analysis.class_centers(np.array([[0.0, 0.0], [2.0, 0.0], [9.0, 9.0]]), [0, 0, 1])
        np.testing.assert_array_equal(cc.centers[0], [1.0, 0.0])

    def test_single_class_zero_matrix(self):
        cc = analysis.class_centers(np.array([[1.0, 2.0]]), [0])
        assert cc.distances.shape == (1, 1)
        assert cc.distances[0, 0] == 0.0

    def test_matrix_properties(self):
        rng = np.random.default_rng(0)
        coords = rng.normal(size=(30, 2))
        labels = rng.integers(0, 5, 30)
        labels[:5] = np.arange(5)  # every class inhabited
        cc = analysis.class_centers(coords, labels)
        assert np.abs(cc.distances - cc.distances.T).max() == 0.0
        assert np.abs(np.diag(cc.distances)).max() == 0.0
        for a in range(5):
            for b in range(5):
                for c in range(5):
                    assert cc.distances[a, c] <= cc.distances[a, b] + cc.distances[b, c] + 1e-9

    def test_missing_class(self):
        with pytest.raises(InputError, match="class 2"):
            analysis.class_centers(np.zeros((2, 2)), [0, 1], num_classes=3)


class TestNearestClasses:
    def line_centers(self):
        return analysis.class_centers(
            np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]), [0, 1, 2]
        )

    def test_two_class_case(self):
        cc = analysis.class_centers(np.array([[0.0, 0.0], [2.0, 0.0]]), [0, 1])
        assert analysis.nearest_classes(cc, 0, 1) == [(1, 2.0)]

    def test_line_ranking(self):
        got = analysis.nearest_classes(self.line_centers(), 0, 2)
        assert [c for c, _ in got] == [1, 2]
        assert got[0][1] == 1.0 and got[1][1] == 3.0

    def test_excludes_source_and_sorted(self):
        got = analysis.nearest_classes(self.line_centers(), 1, 2)
        assert 1 not in [c for c, _ in got]
        dists = [d for _, d in got]
        assert dists == sorted(dists)

    def test_isometry_invariance(self):
        rng = np.random.default_rng(4)
        coords = rng.normal(size=(20, 2))
        labels = np.arange(20) % 4
        theta = 0.83
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        moved = coords @ rot.T + np.array([5.0, -3.0])
        a = analysis.nearest_classes(analysis.class_centers(coords, labels), 0, 3)
        b = analysis.nearest_classes(analysis.class_centers(moved, labels), 0, 3)
        assert [c for c, _ in a] == [c for c, _ in b]

    def test_k_out_of_range(self):
        with pytest.raises(InputError):
            analysis.nearest_classes(self.line_centers(), 0, 3)


class TestSelectivity:
    def centers_on_line(self, k=4):
        pos = np.arange(k, dtype=np.float64) ** 2  # 0,1,4,9: unambiguous gaps
        coords = np.stack([pos, np.zeros(k)], axis=1)
        return analysis.class_centers(coords, np.arange(k))

    def test_all_targets_nearest_gives_full_coverage(self):
        campaign = make_campaign({(0, 1): 5}, num_classes=4, attacked=5)
        rep = analysis.selectivity_report(campaign, self.centers_on_line(), k=1)
        assert rep.per_class[0].coverage == 1.0
        assert rep.aggregate_coverage == 1.0
        assert rep.chance_baseline == 1 / 3

    def test_class_without_successes_is_absent(self):
        campaign = make_campaign({(0, 1): 2}, num_classes=4)
        rep = analysis.selectivity_report(campaign, self.centers_on_line(), k=2)
        assert [cs.source for cs in rep.per_class] == [0]

    def test_histogram_sums_match_success_counts(self):
        pair_counts = {(0, 1): 3, (0, 2): 1, (2, 3): 2}
        campaign = make_campaign(pair_counts, num_classes=4, attacked=10)
        rep = analysis.selectivity_report(campaign, self.centers_on_line(), k=2)
        totals = {cs.source: sum(cs.target_counts.values()) for cs in rep.per_class}
        assert totals == {0: 4, 2: 2}

    def test_no_successes_at_all(self):
        campaign = make_campaign({}, num_classes=4, attacked=9)
        rep = analysis.selectivity_report(campaign, self.centers_on_line(), k=2)
        assert rep.per_class == []
        assert rep.aggregate_coverage is None

    def test_class_set_mismatch(self):
        campaign = make_campaign({(0, 1): 1}, num_classes=5)
        with pytest.raises(InputError, match="classes"):
            analysis.selectivity_report(campaign, self.centers_on_line(4), k=2)


class TestMisclassDistribution:
    def test_single_target_extremes(self):
        campaign = make_campaign({(0, 3): 7}, num_classes=5, attacked=7)
        dist = analysis.misclass_distribution(campaign)
        np.testing.assert_array_equal(dist.counts, [0, 0, 0, 7, 0])
        assert dist.normalized_entropy == 0.0
        assert dist.gini == (5 - 1) / 5

    def test_uniform_extremes(self):
        campaign = make_campaign({(0, t): 3 for t in range(1, 6)}, num_classes=5)
        # targets 1..5 over 5 classes is not uniform; build uniform directly
        dist = analysis.misclass_distribution(
            make_campaign({(1, t): 4 for t in range(5)}, num_classes=5)
        )
        np.testing.assert_array_equal(dist.counts, [4, 4, 4, 4, 4])
        assert dist.normalized_entropy == 1.0
        assert dist.gini == 0.0

    def test_direct_formula_oracle_5_3_1_1_0(self):
        # frozen values from evaluating the entropy/Gini definitions directly
        assert abs(analysis.normalized_entropy([5, 3, 1, 1, 0]) - 0.7258946997275975) < 1e-12
        assert analysis.gini_coefficient([5, 3, 1, 1, 0]) == 0.48

    def test_zero_successes_degenerate(self):
        dist = analysis.misclass_distribution(make_campaign({}, num_classes=4, attacked=5))
        assert dist.degenerate
        assert dist.normalized_entropy is None and dist.gini is None

    def test_bounds_hold(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            counts = rng.integers(0, 10, 6)
            if counts.sum() == 0:
                continue
            h = analysis.normalized_entropy(counts)
            g = analysis.gini_coefficient(counts)
            assert 0.0 <= h <= 1.0
            assert 0.0 <= g <= 1.0
