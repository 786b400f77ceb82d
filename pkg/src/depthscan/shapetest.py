"""Bootstrap test for the existence of shape outliers.

The statistic ``T = |min(r) - 1| / sd(r)`` summarises the pairwise-depth
correlations of a sample.  Its null distribution is approximated by a
parametric bootstrap from a Gaussian process fitted robustly to the data: the
pointwise median as mean, Qn-based componentwise covariances pooled by lag,
and a stationary covariance family fitted to those by least squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import (
    FitFailure,
    FunctionalSample,
    GridTooShort,
    LengthMismatch,
    OutOfRange,
    TestResult,
    TimeGrid,
    TooFewCurves,
    as_values,
)
from .depth import pointwise_median, pwd_matrix
from .detect import shape_correlations
from .simulate import jittered_cholesky, matern, replicate_seed

__all__ = [
    "QN_CONSTANT",
    "NullModel",
    "test_statistic",
    "qn_scale",
    "qn_covariance",
    "qn_covariance_matrix",
    "covariance_family",
    "fit_null_model",
    "bootstrap_null_distribution",
    "existence_test",
]

# 1 / (sqrt(2) * Phi^{-1}(5/8)): Qn consistency at the Gaussian
QN_CONSTANT = 2.2191

_BRUTE_PAIRS = 4_000_000


def test_statistic(r) -> float:
    """``|min(r) - 1| / sd(r)`` with the ``n - 1`` standard deviation.

    Constant ``r`` gives 0.  Leading axes of ``r`` are treated as a batch.
    """
    r = np.asarray(r, dtype=float)
    if r.shape[-1] < 2:
        raise TooFewCurves("the test statistic needs at least 2 correlations")
    sd = r.std(axis=-1, ddof=1)
    constant = np.ptp(r, axis=-1) == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.abs(r.min(axis=-1) - 1.0) / sd
    t = np.where(constant, 0.0, t)
    return float(t) if t.ndim == 0 else t


def _qn_rank(n: int) -> int:
    h = n // 2 + 1
    return h * (h - 1) // 2


def _qn_brute(x: np.ndarray) -> np.ndarray:
    """k-th smallest pairwise distance along the last axis."""
    n = x.shape[-1]
    k = _qn_rank(n)
    i, j = np.triu_indices(n, 1)
    d = np.abs(x[..., i] - x[..., j])
    return np.partition(d, k - 1, axis=-1)[..., k - 1]


def _weighted_median(values, weights):
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    return values[order][np.searchsorted(cum, cum[-1] / 2.0)]


def _row_counts(y, rows, trial, strict):
    """Per row ``i``, how many of ``y[i] - y[i-1-r]`` (r < i) are below ``trial``.

    The row differences are non-decreasing in ``r``, so a vectorised
    bisection over all rows at once counts them exactly as computed.
    """
    lo = np.zeros_like(rows)
    hi = rows.copy()
    while np.any(lo < hi):
        active = lo < hi
        mid = (lo + hi) // 2
        d = y[rows] - y[np.maximum(rows - 1 - mid, 0)]
        below = (d < trial) if strict else (d <= trial)
        go_right = active & below
        lo = np.where(go_right, mid + 1, lo)
        hi = np.where(active & ~below, mid, hi)
    return lo


def _qn_select(x: np.ndarray) -> float:
    """Exact k-th smallest pairwise distance in ``O(n log n)`` per round.

    Candidates are kept as a contiguous index range per row of the sorted
    difference table; each round prunes a constant fraction using the
    weighted median of the row midpoints as pivot.
    """
    y = np.sort(x)
    n = y.size
    k = _qn_rank(n)
    rows = np.arange(n)
    lo = np.zeros(n, dtype=np.int64)
    hi = rows.copy()  # row i holds i differences
    while True:
        cnt = hi - lo
        if cnt.sum() <= 4 * n:
            break
        act = np.flatnonzero(cnt > 0)
        mid = lo[act] + cnt[act] // 2
        vals = y[act] - y[act - 1 - mid]
        trial = _weighted_median(vals, cnt[act])
        n_lt = _row_counts(y, rows, trial, strict=True)
        n_le = _row_counts(y, rows, trial, strict=False)
        if k <= n_lt.sum():
            hi = np.minimum(hi, n_lt)
        elif k > n_le.sum():
            lo = np.maximum(lo, n_le)
        else:
            return float(trial)
    cand = [y[i] - y[i - 1 - np.arange(lo[i], hi[i])] for i in np.flatnonzero(hi > lo)]
    cand = np.sort(np.concatenate(cand))
    return float(cand[k - lo.sum() - 1])


def qn_scale(x, axis: int = -1):
    """Rousseeuw-Croux Qn scale: ``2.2191`` times the ``C(h, 2)``-th smallest
    pairwise distance, ``h = n // 2 + 1``.  No finite-sample correction.

    Multi-dimensional input is reduced along ``axis``.
    """
    x = np.moveaxis(np.asarray(x, dtype=float), axis, -1)
    n = x.shape[-1]
    if n < 2:
        raise TooFewCurves("Qn needs at least 2 observations")
    pairs = n * (n - 1) // 2
    batch = x.reshape(-1, n)
    if pairs <= _BRUTE_PAIRS:
        step = max(1, _BRUTE_PAIRS // pairs)
        raw = np.concatenate([_qn_brute(batch[s:s + step]) for s in range(0, batch.shape[0], step)])
    else:
        raw = np.array([_qn_select(row) for row in batch])
    out = QN_CONSTANT * raw.reshape(x.shape[:-1])
    return float(out) if out.ndim == 0 else out


def qn_covariance(x, y) -> float:
    """Robust covariance ``(Qn(x + y)^2 - Qn(x - y)^2) / 4``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.shape} vs {y.shape}")
    return (qn_scale(x + y) ** 2 - qn_scale(x - y) ** 2) / 4.0


def qn_covariance_matrix(values) -> np.ndarray:
    """Componentwise Qn covariance of all column pairs of an ``n x p`` matrix."""
    x = np.asarray(values, dtype=float)
    p = x.shape[1]
    j, l = np.triu_indices(p)
    plus = qn_scale(x[:, j] + x[:, l], axis=0)
    minus = qn_scale(x[:, j] - x[:, l], axis=0)
    cov = np.empty((p, p))
    cov[j, l] = cov[l, j] = (plus**2 - minus**2) / 4.0
    return cov


# Families are k * rho(h; a, b); grids seed the least-squares refinement.
def _powexp(h, a, b):
    return np.exp(-((h / a) ** b))


def _matern(h, a, b):
    return matern(h, b, 1.0 / a)


def _ratquad(h, a, b):
    return (1.0 + h**2 / (2.0 * b * a**2)) ** (-b)


_FAMILIES = {
    # name: (correlation, names of (a, b), grid of b, bounds of b)
    "powexp": (_powexp, ("c", "mu"), np.round(np.arange(0.1, 2.0, 0.1), 1), (1e-3, 2.0)),
    "matern": (_matern, ("range", "nu"), np.array([0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5]), (0.05, 10.0)),
    "ratquad": (_ratquad, ("c", "alpha"), np.array([0.1, 0.25, 0.5, 1.0, 2.0, 5.0]), (1e-3, 100.0)),
}


def covariance_family(name: str, params: dict):
    """Callable ``h -> covariance`` for fitted parameters of a family."""
    rho, (a_name, b_name), _, _ = _FAMILIES[name]
    return lambda h: params["k"] * rho(np.abs(np.asarray(h, dtype=float)), params[a_name], params[b_name])


@dataclass(frozen=True, eq=False)
class NullModel:
    """Gaussian null process: mean curve, covariance on the grid and its fit."""

    mean: np.ndarray
    covariance: np.ndarray
    fitted_params: dict
    family: str = "powexp"
    factor: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "covariance", cov)
        if self.factor is None:
            scale = max(float(self.fitted_params.get("k", 0.0)), 0.0) or None
            object.__setattr__(self, "factor", jittered_cholesky(cov, scale=scale))


def _pool_by_lag(cov, points):
    lags = np.abs(points[:, None] - points[None, :])
    j, l = np.triu_indices(points.size)
    key = np.round(lags[j, l], 10)
    uniq, inverse = np.unique(key, return_inverse=True)
    pooled = np.array([np.median(cov[j, l][inverse == u]) for u in range(uniq.size)])
    return uniq, pooled


def _fit_family(h, y, family):
    rho, _, b_grid, b_bounds = _FAMILIES[family]
    positive = h[h > 0]
    a_grid = np.geomspace(positive.min() / 4, positive.max() * 50, 60)
    best = None
    for b in b_grid:
        for a in a_grid:
            g = rho(h, a, b)
            gg = g @ g
            k = max((g @ y) / gg, 0.0) if gg > 0 else 0.0
            sse = float(np.sum((k * g - y) ** 2))
            if best is None or sse < best[0]:
                best = (sse, k, a, b)
    sse0, k0, a0, b0 = best
    if k0 <= 0:
        return k0, a0, b0, sse0

    def resid(theta):
        return np.exp(theta[0]) * rho(h, np.exp(theta[1]), theta[2]) - y

    try:
        sol = optimize.least_squares(
            resid,
            x0=[np.log(k0), np.log(a0), b0],
            bounds=([-np.inf, -np.inf, b_bounds[0]], [np.inf, np.inf, b_bounds[1]]),
        )
        if sol.success and np.all(np.isfinite(sol.x)):
            sse = float(np.sum(sol.fun**2))
            if sse <= sse0:
                return float(np.exp(sol.x[0])), float(np.exp(sol.x[1])), float(sol.x[2]), sse
    except (ValueError, FloatingPointError):
        pass
    # refinement failed or did not improve: keep the grid optimum
    return k0, a0, b0, sse0


def fit_null_model(sample, grid=None, family: str = "powexp") -> NullModel:
    """Robust Gaussian null model for the bootstrap.

    Mean is the pointwise median.  Qn covariances of all column pairs are
    pooled into one value per lag by their median, and ``family`` (default
    powered exponential ``k exp(-(h / c)^mu)``) is fitted to the pooled
    curve by least squares, starting from the best point of a parameter
    grid.  The covariance on the grid gets escalating diagonal jitter from
    ``1e-10 k`` until it factorises.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown covariance family {family!r}")
    x = as_values(sample)
    if grid is None:
        grid = sample.grid if isinstance(sample, FunctionalSample) else TimeGrid.uniform(x.shape[1])
    points = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if x.shape[1] < 3:
        raise GridTooShort("the null model needs at least 3 time points")
    if x.shape[0] < 3:
        raise TooFewCurves("the null model needs at least 3 curves")

    mean = pointwise_median(x)
    cov = qn_covariance_matrix(x)
    lags, pooled = _pool_by_lag(cov, points)
    _, (a_name, b_name), _, _ = _FAMILIES[family]
    if np.max(np.abs(pooled)) <= 1e-300:
        raise FitFailure("sample has no dispersion; covariance scale is zero",
                         {"k": 0.0, a_name: float("nan"), b_name: float("nan")})
    k, a, b, sse = _fit_family(lags, pooled, family)
    params = {"k": k, a_name: a, b_name: b, "sse": sse}
    if k <= 0:
        raise FitFailure("fitted covariance scale is not positive", params)
    sigma = covariance_family(family, params)(points[:, None] - points[None, :])
    sigma = (sigma + sigma.T) / 2.0
    factor = jittered_cholesky(sigma, start=1e-10, cap=1e-4, scale=k)
    return NullModel(mean, sigma, params, family, factor)


def bootstrap_null_distribution(model: NullModel, n: int, grid=None, B: int = 500, seed=0,
                                batch: int = 50) -> np.ndarray:
    """``B`` test statistics of samples of ``n`` curves drawn from ``model``.

    Replicate ``b`` draws from its own generator seeded by ``(seed, b)``, so
    the result does not depend on batching.
    """
    if B < 1:
        raise OutOfRange("B must be positive")
    L = model.factor
    p = L.shape[0]
    out = np.empty(B)
    for start in range(0, B, batch):
        stop = min(start + batch, B)
        z = np.stack([
            np.random.default_rng(replicate_seed(seed, b)).standard_normal((n, p)) for b in range(start, stop)
        ])
        curves = model.mean + z @ L.T
        out[start:stop] = test_statistic(shape_correlations(pwd_matrix(curves)))
    return out


def existence_test(sample, alpha: float = 0.05, B: int = 500, seed=0, model: NullModel = None,
                   family: str = "powexp", alphas=None):
    """Test ``H0: no shape outliers`` at level ``alpha``.

    Rejects when the observed statistic reaches the empirical ``1 - alpha``
    quantile (linear interpolation) of the bootstrap statistics.  With
    ``alphas`` a sequence, one :class:`TestResult` per level is returned,
    all sharing the same bootstrap draws.
    """
    levels = [alpha] if alphas is None else list(alphas)
    for a in levels:
        if not 0.0 < a < 0.5:
            raise OutOfRange(f"alpha must lie in (0, 0.5), got {a}")
    x = as_values(sample)
    if model is None:
        model = fit_null_model(sample, family=family)
    observed = test_statistic(shape_correlations(pwd_matrix(x)))
    boot = bootstrap_null_distribution(model, x.shape[0], B=B, seed=seed)
    results = []
    for a in levels:
        crit = float(np.quantile(boot, 1.0 - a))
        results.append(TestResult(
            statistic=float(observed),
            critical_value=crit,
            alpha=float(a),
            p_value_estimate=float(np.mean(boot >= observed)),
            reject=bool(observed >= crit),
            B=int(B),
        ))
    return results[0] if alphas is None else results
