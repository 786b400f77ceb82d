import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from depthscan.core import FitFailure, FunctionalSample, LengthMismatch, ModelSpec, OutOfRange, TooFewCurves
from depthscan.depth import pwd_matrix
from depthscan.detect import shape_correlations
from depthscan.io import read_curves
from depthscan.shapetest import (
    QN_CONSTANT,
    NullModel,
    _qn_brute,
    _qn_select,
    bootstrap_null_distribution,
    covariance_family,
    existence_test,
    fit_null_model,
    qn_covariance,
    qn_covariance_matrix,
    qn_scale,
    test_statistic as statistic,
)
from depthscan.simulate import generate

from oracles import qn_raw


class TestStatistic:
    def test_hand_value(self):
        assert statistic([0.9, 0.8, 1.0]) == pytest.approx(2.0)

    def test_constant(self):
        assert statistic([0.3] * 7) == 0.0

    def test_grows_as_min_drops(self):
        base = list(np.random.default_rng(0).uniform(0.85, 0.99, 99))
        values = [statistic(base + [m]) for m in np.linspace(0.85, -1.0, 12)]
        assert all(a < b for a, b in zip(values, values[1:]))
        # the statistic saturates: one value can never push it past sqrt(n)
        assert values[-1] < np.sqrt(100) * 1.02

    def test_too_short(self):
        with pytest.raises(TooFewCurves):
            statistic([0.5])

    def test_location_scale_invariant(self):
        labeled = generate(ModelSpec("U1", n=50, p=30, theta=0.1, seed=3))
        x = np.asarray(labeled.sample.values)
        a = statistic(shape_correlations(pwd_matrix(x)))
        b = statistic(shape_correlations(pwd_matrix(-0.5 + 4.0 * x)))
        assert a == b


class TestQn:
    def test_hand_example(self):
        assert qn_scale([1, 2, 3, 4]) == pytest.approx(QN_CONSTANT)

    def test_constant(self):
        assert qn_scale(np.full(9, 3.0)) == 0.0

    def test_too_short(self):
        with pytest.raises(TooFewCurves):
            qn_scale([1.0])

    @pytest.mark.parametrize("n", range(2, 51))
    def test_matches_enumeration(self, n):
        x = np.random.default_rng(n).normal(size=n)
        assert qn_scale(x) == QN_CONSTANT * qn_raw(x)

    @pytest.mark.parametrize("n", [101, 500, 2001])
    def test_selection_matches_brute_force(self, n):
        rng = np.random.default_rng(n)
        x = rng.normal(size=n)
        assert _qn_select(x) == _qn_brute(x[None])[0]
        ties = rng.integers(0, 20, size=n).astype(float)
        assert _qn_select(ties) == _qn_brute(ties[None])[0]

    def test_gaussian_consistency(self):
        x = np.random.default_rng(0).standard_normal(100_000)
        assert abs(qn_scale(x) - 1.0) < 0.02

    @given(arrays(float, st.integers(2, 40), elements=st.floats(-100, 100)),
           st.floats(-10, 10).filter(lambda a: abs(a) > 1e-3), st.floats(-100, 100))
    def test_affine_equivariance(self, x, a, b):
        assert qn_scale(a * x + b) == pytest.approx(abs(a) * qn_scale(x), rel=1e-9, abs=1e-9)

    def test_axis_batch(self):
        x = np.random.default_rng(1).normal(size=(30, 4))
        np.testing.assert_array_equal(qn_scale(x, axis=0), [qn_scale(x[:, j]) for j in range(4)])


class TestQnCovariance:
    def test_variance_case(self):
        x = np.random.default_rng(2).normal(size=41)
        assert qn_covariance(x, x) == pytest.approx(qn_scale(x) ** 2)
        assert qn_covariance(x, -x) == pytest.approx(-qn_scale(x) ** 2)

    def test_gaussian_covariance(self):
        z = np.random.default_rng(1).multivariate_normal([0, 0], [[1, 0.6], [0.6, 1]], size=20_000)
        assert abs(qn_covariance(z[:, 0], z[:, 1]) - 0.6) < 0.05

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            qn_covariance(np.zeros(3), np.zeros(4))

    def test_matrix_entries(self):
        x = np.random.default_rng(3).normal(size=(25, 5))
        m = qn_covariance_matrix(x)
        assert m[1, 3] == pytest.approx(qn_covariance(x[:, 1], x[:, 3]))
        np.testing.assert_array_equal(m, m.T)


class TestNullModel:
    def test_base_process_fit(self):
        fits, errors = [], []
        h = np.linspace(0, 1, 50)
        for seed in range(10):
            sample = generate(ModelSpec("U1", n=200, p=50, theta=0.0, seed=seed)).sample
            model = fit_null_model(sample)
            fp = model.fitted_params
            fits.append((fp["k"], fp["c"], fp["mu"]))
            errors.append(np.max(np.abs(covariance_family("powexp", fp)(h) - np.exp(-h))))
        # single fits trade c against mu; their median and the fitted curve are stable
        np.testing.assert_allclose(np.median(fits, axis=0), 1.0, atol=0.2)
        assert max(errors) < 0.25

    def test_model_is_positive_definite_and_monotone(self):
        model = fit_null_model(generate(ModelSpec("U2", n=80, p=40, theta=0.0, seed=1)).sample)
        cov = model.covariance
        np.testing.assert_array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov + 1e-10 * model.fitted_params["k"] * np.eye(40)).min() > 0
        g = covariance_family("powexp", model.fitted_params)(np.linspace(0, 3, 200))
        assert np.all(np.diff(g) <= 0) and g[0] == pytest.approx(model.fitted_params["k"])

    def test_robust_to_magnitude_outliers(self):
        sample = generate(ModelSpec("U1", n=200, p=50, theta=0.0, seed=4)).sample
        x = np.array(sample.values)
        clean_k = fit_null_model(sample).fitted_params["k"]
        x[::10] += 10.0
        k = fit_null_model(FunctionalSample(sample.grid, x)).fitted_params["k"]
        # Qn keeps the inflation far below the classical variance (about 10 here)
        assert np.var(x[:, 0]) > 5
        assert k - clean_k < 1.0

    def test_constant_sample(self):
        with pytest.raises(FitFailure) as info:
            fit_null_model(FunctionalSample.from_array(np.ones((10, 6))))
        assert info.value.params["k"] == 0.0

    @pytest.mark.parametrize("family", ["matern", "ratquad"])
    def test_other_families(self, family):
        model = fit_null_model(generate(ModelSpec("U1", n=60, p=20, theta=0.0, seed=2)).sample, family=family)
        assert model.family == family and model.fitted_params["k"] > 0


class TestBootstrap:
    @pytest.fixture(scope="class")
    @staticmethod
    def model():
        return fit_null_model(generate(ModelSpec("U1", n=100, p=50, theta=0.0, seed=9)).sample)

    def test_reproducible(self, model):
        a = bootstrap_null_distribution(model, 100, B=60, seed=5)
        b = bootstrap_null_distribution(model, 100, B=60, seed=5, batch=7)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, bootstrap_null_distribution(model, 100, B=60, seed=6))

    def test_quantile_stable_across_seeds(self, model):
        q1 = np.quantile(bootstrap_null_distribution(model, 100, B=500, seed=1), 0.95)
        q2 = np.quantile(bootstrap_null_distribution(model, 100, B=500, seed=2), 0.95)
        assert np.isfinite(q1) and abs(q1 - q2) <= 0.05 * q1

    def test_small_and_large_b_agree(self, model):
        small = bootstrap_null_distribution(model, 100, B=100, seed=3)
        large = bootstrap_null_distribution(model, 100, B=1000, seed=4)
        # Dvoretzky-Kiefer-Wolfowitz band for B = 100 at 95% confidence
        eps = np.sqrt(np.log(2 / 0.05) / (2 * 100))
        grid = np.quantile(large, np.linspace(0.05, 0.95, 19))
        ecdf_small = (small[:, None] <= grid).mean(axis=0)
        ecdf_large = (large[:, None] <= grid).mean(axis=0)
        assert np.max(np.abs(ecdf_small - ecdf_large)) < eps

    def test_degenerate_model(self):
        model = NullModel(np.zeros(8), np.zeros((8, 8)), {"k": 0.0})
        assert np.all(bootstrap_null_distribution(model, 20, B=10) == 0.0)


class TestExistence:
    def test_clean_fixture_not_rejected(self, data_dir):
        res = existence_test(read_curves(data_dir / "clean.csv"), alpha=0.05, B=500, seed=0)
        assert not res.reject

    def test_single_outlier_fixture_rejected(self, data_dir):
        res = existence_test(read_curves(data_dir / "single_outlier.csv"), alpha=0.05, B=500, seed=0)
        assert res.reject

    def test_decision_rule(self, data_dir):
        sample = read_curves(data_dir / "u1.csv")
        for res in existence_test(sample, B=100, seed=1, alphas=[0.01, 0.05, 0.2]):
            assert res.reject == (res.statistic >= res.critical_value)
            assert 0.0 <= res.p_value_estimate <= 1.0

    def test_levels_nested(self, data_dir):
        sample = read_curves(data_dir / "clean.csv")
        results = existence_test(sample, B=200, seed=2, alphas=[0.01, 0.05, 0.10])
        crits = [r.critical_value for r in results]
        assert crits[0] >= crits[1] >= crits[2]

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 0.7])
    def test_alpha_range(self, alpha):
        with pytest.raises(OutOfRange):
            existence_test(np.zeros((5, 5)), alpha=alpha)
