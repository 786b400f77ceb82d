import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthscan.core import (
    BivariateFunctionalSample,
    EmptyAfterCleaning,
    FunctionalSample,
    GridTooShort,
    ModelSpec,
    TimeGrid,
    TooFewCurves,
)
from depthscan.depth import pwd_matrix
from depthscan.detect import (
    DetectConfig,
    boxplot_fences,
    detect,
    five_number_summary,
    magnitude_flags,
    pairwise_depth,
    shape_correlations,
    shape_flags,
    shape_scores,
)
from depthscan.simulate import generate


def gaussian_curves(n=60, p=30, seed=0):
    t = np.linspace(0, 1, p)
    cov = np.exp(-np.abs(t[:, None] - t[None, :]))
    return np.random.default_rng(seed).multivariate_normal(np.zeros(p), cov, size=n)


class TestPairwiseDepth:
    def test_pairs(self):
        pairs = pairwise_depth(np.array([[0.1, 0.2, 0.3]]))
        np.testing.assert_array_equal(pairs[0], [[0.1, 0.2], [0.2, 0.3]])

    def test_short_grid(self):
        with pytest.raises(GridTooShort):
            pairwise_depth(np.ones((4, 2)))
        with pytest.raises(GridTooShort):
            shape_correlations(np.ones((4, 2)))

    def test_length(self):
        assert pairwise_depth(np.ones((5, 9))).shape == (5, 8, 2)


class TestCorrelations:
    def test_constant_row(self):
        assert shape_correlations(np.full((1, 5), 0.4))[0] == 1.0

    def test_linear_row(self):
        assert shape_correlations(np.array([[0.1, 0.2, 0.3, 0.4]]))[0] == pytest.approx(1.0)

    def test_alternating_row(self):
        assert shape_correlations(np.array([[0.5, 0.1, 0.5, 0.1, 0.5]]))[0] == pytest.approx(-1.0)

    def test_batch(self):
        d = np.random.default_rng(1).random((3, 7, 6))
        r = shape_correlations(d)
        for b in range(3):
            for i in range(7):
                expected = np.corrcoef(d[b, i, :-1], d[b, i, 1:])[0, 1]
                assert r[b, i] == pytest.approx(expected, abs=1e-12)


class TestShapeFlags:
    def test_hand_quartiles(self):
        s = shape_flags([0.99, 0.98, 0.97, 0.99, 0.98, 0.10])
        assert s.fences.q1 == pytest.approx(0.9725)
        assert s.fences.q3 == pytest.approx(0.9875)
        assert s.lower_fence == pytest.approx(0.9275)
        np.testing.assert_array_equal(s.flagged, [5])

    def test_all_equal(self):
        assert shape_flags([0.7] * 8).flagged.size == 0

    def test_too_few(self):
        with pytest.raises(TooFewCurves):
            shape_flags([0.1, 0.2, 0.3, 0.4])

    def test_infinite_factor(self):
        assert shape_flags([0.9, 0.9, 0.9, 0.9, -1.0, 0.95], factor=np.inf).flagged.size == 0

    @given(st.lists(st.floats(-1, 1), min_size=5, max_size=40), st.floats(0, 5), st.floats(0, 5))
    def test_factor_monotone(self, r, f1, f2):
        lo, hi = sorted((f1, f2))
        assert set(shape_flags(r, hi).flagged) <= set(shape_flags(r, lo).flagged)

    def test_fence_identities(self):
        f = boxplot_fences(np.arange(11.0), 1.5)
        assert f.iqr == f.q3 - f.q1 >= 0
        assert f.lower == f.q1 - 1.5 * f.iqr and f.upper == f.q3 + 1.5 * f.iqr


class TestMagnitude:
    def test_shifted_curve_flagged(self):
        x = gaussian_curves(50, 20, seed=2)
        x[7] += 10 * x.std()
        assert 7 in magnitude_flags(x)

    def test_identical_curves(self):
        assert magnitude_flags(np.tile(np.sin(np.linspace(0, 3, 10)), (8, 1))).size == 0

    def test_boundary_not_flagged(self):
        # members are curves 0-2 (envelope [0, 1]); upper fence 1 + 1.5 * 1 = 2.5
        x = np.array([[0.0] * 4, [1.0] * 4, [0.5] * 4, [0.4] * 4, [0.6] * 4, [2.5] * 4])
        depth = np.array([5.0, 5.0, 5.0, 0.0, 0.0, 0.0])
        flags = magnitude_flags(x, 1.5, coverage=0.5, depth=depth)
        assert 5 not in flags
        x[5, 2] = 2.5 + 1e-9
        assert 5 in magnitude_flags(x, 1.5, coverage=0.5, depth=depth)


class TestDetect:
    def test_u1_shape_outliers_found(self):
        labeled = generate(ModelSpec("U1", n=100, p=50, theta=0.1, seed=7))
        rep = detect(labeled.sample)
        assert set(rep.outlier_indices) == set(labeled.outlier_indices.tolist())

    def test_clean_false_flag_rate(self):
        rates = []
        for seed in range(20):
            rep = detect(FunctionalSample.from_array(gaussian_curves(100, 50, seed)), DetectConfig(magnitude=False))
            rates.append(len(rep.shape_indices))
        assert np.mean(rates) < 5

    def test_vertical_shifts(self):
        base = np.sin(np.linspace(0, 6, 25))
        x = base + np.linspace(-3, 3, 30)[:, None]
        rep = detect(FunctionalSample.from_array(x))
        assert rep.shape_indices == () and np.all(rep.shape_scores.r == rep.shape_scores.r[0])

    @given(st.integers(0, 2**32 - 1))
    def test_monotone_transform_invariance(self, seed):
        x = gaussian_curves(30, 12, seed % 1000)
        a = detect(FunctionalSample.from_array(x), DetectConfig(magnitude=False))
        b = detect(FunctionalSample.from_array(np.arctan(2 * x) + 4.0), DetectConfig(magnitude=False))
        np.testing.assert_array_equal(a.shape_scores.r, b.shape_scores.r)
        assert a.shape_indices == b.shape_indices

    def test_common_shift_changes_nothing(self):
        x = gaussian_curves(40, 15, 3)
        a = detect(FunctionalSample.from_array(x))
        b = detect(FunctionalSample.from_array(x + 2.5))
        assert a == b

    def test_indices_refer_to_original_sample(self):
        x = gaussian_curves(40, 40, 4)
        # jumps between the centre and the edge of the bulk: depth alternates high/low
        x[10] = np.where(np.arange(40) % 2 == 0, np.median(x, axis=0), np.quantile(x, 0.9, axis=0))
        x[3] += 50.0
        rep = detect(FunctionalSample.from_array(x))
        assert 3 in rep.magnitude_indices
        assert 3 not in rep.shape_scores.indices
        assert 10 in rep.shape_indices

    def test_empty_after_cleaning(self):
        # the 4 central curves survive, the 4 far ones are removed
        x = np.array([0.0, 0.1, -0.1, 0.05, 10.0, -10.0, 20.0, -20.0])[:, None] + np.zeros((1, 5))
        with pytest.raises(EmptyAfterCleaning):
            detect(FunctionalSample.from_array(x))

    def test_depth_summary(self):
        x = gaussian_curves(20, 10, 5)
        rep = detect(FunctionalSample.from_array(x))
        d = pwd_matrix(x)
        np.testing.assert_allclose(rep.depth_summary, five_number_summary(d))
        assert rep.median_index == int(np.argmax(d.mean(axis=1)))

    def test_bivariate_identical_components(self):
        # with equal components the planar points lie on a line, where simplicial
        # depth orders points like the univariate depth
        x = gaussian_curves(12, 10, 6)
        uni = shape_scores(FunctionalSample.from_array(x))
        biv = shape_scores(BivariateFunctionalSample(TimeGrid.uniform(10), x, x))
        np.testing.assert_allclose(biv.r, uni.r, atol=1e-12)
        np.testing.assert_array_equal(biv.flagged, uni.flagged)

    def test_bivariate_detect_runs(self):
        labeled = generate(ModelSpec("M2", n=30, p=15, theta=0.1, seed=1))
        rep = detect(labeled.sample)
        assert rep.depth_summary.shape == (30, 5)
