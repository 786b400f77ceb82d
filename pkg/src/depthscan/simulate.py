"""Gaussian process simulation and the shape-outlier simulation models.

Univariate models U1-U5 and bivariate models M1-M3 all share the same
recipe: draw contamination labels ``c_i ~ Bernoulli(theta)``, draw the base
process for every curve and replace or perturb the contaminated curves.  All
draws for one sample come from a single seeded generator, in a fixed order,
so a :class:`~depthscan.core.ModelSpec` reproduces its sample exactly.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, fields

import numpy as np
from scipy import special

from .core import (
    BivariateFunctionalSample,
    DomainError,
    FunctionalSample,
    ModelSpec,
    NotPositiveDefinite,
    TimeGrid,
)

__all__ = [
    "LabeledSample",
    "MaternParams",
    "bessel_k",
    "matern",
    "powered_exponential",
    "jittered_cholesky",
    "gp_simulate",
    "matern_cross_covariance",
    "bivariate_gp_simulate",
    "generate",
    "replicate_seed",
]


def replicate_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Seed of replicate ``index`` derived from a master seed."""
    return np.random.SeedSequence([int(seed), int(index)])


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def bessel_k(nu, x):
    """Modified Bessel function of the second kind ``K_nu(x)`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(np.isnan(x)):
        raise DomainError("bessel_k requires x > 0")
    if np.any(np.asarray(nu) < 0):
        raise DomainError("bessel_k requires nu >= 0")
    out = special.kv(nu, x)
    return float(out) if np.ndim(out) == 0 else out


def matern(h, nu: float, gamma: float):
    """Matérn correlation ``2^(1-nu)/Gamma(nu) (gamma h)^nu K_nu(gamma h)``, 1 at ``h = 0``."""
    if nu <= 0 or gamma <= 0:
        raise DomainError(f"matern needs nu > 0 and gamma > 0, got nu={nu}, gamma={gamma}")
    x = gamma * np.abs(np.asarray(h, dtype=float))
    out = np.ones_like(x)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        # log form avoids overflow of Gamma/K for large nu and tiny x
        logv = (1 - nu) * np.log(2) - special.gammaln(nu) + nu * np.log(xp) + np.log(special.kv(nu, xp))
        out[pos] = np.where(np.isfinite(logv), np.exp(logv), 0.0)
    return float(out) if out.ndim == 0 else out


def powered_exponential(h, k: float = 1.0, mu: float = 1.0, c: float = 1.0):
    """Covariance ``k exp(-|h|^mu / c)``."""
    return k * np.exp(-np.abs(np.asarray(h, dtype=float)) ** mu / c)


def jittered_cholesky(cov, start: float = 1e-10, cap: float = 1e-4, scale=None) -> np.ndarray:
    """Lower Cholesky factor of ``cov + jitter * I``.

    Jitter starts at ``start * scale`` (``scale`` defaults to the largest
    diagonal entry) and grows tenfold until the factorisation succeeds;
    :class:`NotPositiveDefinite` is raised beyond ``cap * scale``.  An
    all-zero matrix returns a zero factor.
    """
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise NotPositiveDefinite("covariance matrix is not symmetric")
    if scale is None:
        scale = float(np.max(np.diag(cov))) if cov.size else 0.0
    if scale <= 0:
        if np.all(cov == 0):
            return np.zeros_like(cov)
        raise NotPositiveDefinite("covariance has no positive diagonal entry")
    eye = np.eye(cov.shape[0])
    jitter = start * scale
    while jitter <= cap * scale * (1 + 1e-9):
        try:
            return np.linalg.cholesky(cov + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10
    raise NotPositiveDefinite(f"covariance not positive definite even with jitter {cap * scale:g}")


def gp_simulate(mean, cov, n: int, seed=None, factor=None) -> np.ndarray:
    """``n`` independent draws of ``N(mean, cov)`` as an ``n x p`` matrix.

    Pass a precomputed lower Cholesky ``factor`` to skip the factorisation.
    """
    mean = np.asarray(mean, dtype=float)
    L = jittered_cholesky(cov) if factor is None else factor
    z = _rng(seed).standard_normal((n, L.shape[0]))
    return mean + z @ L.T


@dataclass(frozen=True)
class MaternParams:
    """Bivariate Matérn cross-covariance parameters (multiplicative range ``gamma``)."""

    sigma1: float = 1.0
    sigma2: float = 1.0
    rho12: float = 0.6
    gamma11: float = 0.02
    gamma22: float = 0.01
    gamma12: float = 0.016
    nu11: float = 1.2
    nu22: float = 0.6
    nu12: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if f.name != "rho12" and not getattr(self, f.name) > 0:
                raise DomainError(f"{f.name} must be positive")
        if not -1 < self.rho12 < 1:
            raise DomainError("rho12 must lie in (-1, 1)")


def matern_cross_covariance(params: MaternParams, grid) -> np.ndarray:
    """Block covariance ``[[C11, C12], [C12^T, C22]]`` of the two components on ``grid``."""
    t = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    h = np.abs(t[:, None] - t[None, :])
    c11 = params.sigma1**2 * matern(h, params.nu11, params.gamma11)
    c22 = params.sigma2**2 * matern(h, params.nu22, params.gamma22)
    c12 = params.rho12 * params.sigma1 * params.sigma2 * matern(h, params.nu12, params.gamma12)
    return np.block([[c11, c12], [c12.T, c22]])


def bivariate_gp_simulate(params: MaternParams, grid, n: int, seed=None, factor=None):
    """Draw ``n`` bivariate curves from the zero-mean Matérn process.

    Returns a :class:`BivariateFunctionalSample`.
    """
    grid = grid if isinstance(grid, TimeGrid) else TimeGrid(grid)
    if factor is None:
        try:
            factor = jittered_cholesky(matern_cross_covariance(params, grid))
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(f"{exc}; parameters: {params}") from None
    draws = gp_simulate(np.zeros(2 * grid.p), None, n, seed, factor=factor)
    return BivariateFunctionalSample(grid, draws[:, : grid.p], draws[:, grid.p:])


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """A simulated sample with the indices of its contaminated curves."""

    sample: object
    outlier_indices: np.ndarray
    spec: ModelSpec

    @property
    def labels(self) -> np.ndarray:
        out = np.zeros(self.sample.n, dtype=bool)
        out[self.outlier_indices] = True
        return out


@functools.lru_cache(maxsize=64)
def _powexp_factor(p: int, k: float, mu: float, c: float) -> np.ndarray:
    t = TimeGrid.uniform(p).points
    L = jittered_cholesky(powered_exponential(t[:, None] - t[None, :], k, mu, c))
    L.setflags(write=False)
    return L


@functools.lru_cache(maxsize=16)
def _matern_factor(p: int, params: MaternParams) -> np.ndarray:
    L = jittered_cholesky(matern_cross_covariance(params, TimeGrid.uniform(p)))
    L.setflags(write=False)
    return L


def _draw(rng, n, factor):
    return rng.standard_normal((n, factor.shape[0])) @ factor.T


def generate(spec: ModelSpec) -> LabeledSample:
    """Simulate one sample of the model described by ``spec`` on a uniform grid over [0, 1].

    Base process ``e`` has covariance ``exp(-|s-t|)``.  Outlier processes:

    * U1: ``6 exp(-|s-t|^0.1)``, or ``k exp(-|s-t|^mu / c)`` via overrides.
    * U2: phase-shifted ``2 sin(15 pi t + 4)`` instead of ``2 sin(15 pi t)``.
    * U3: ``arctan(t) + eps`` against inliers ``0.1 + arctan(t) + e``.
    * U4: ``30 t (1-t)^1.5 + eps`` against ``30 t (1-t)^1.5 + e``.
    * U5: ``0.1 sin(40 (t + Theta) pi) + eps``, ``Theta ~ U[0.25, 0.5]`` per curve.

    with ``eps`` of covariance ``0.1 exp(-|s-t|^0.1 / 4)``.  M1-M3 add
    ``(0.5 cos 80 pi t, 0.75 sin 40 pi t)``, ``(2 cos 80 pi t, 3 sin 40 pi t)``
    and ``(cos 40 pi t, sin 40 pi t)`` to bivariate Matérn curves.
    ``overrides["noise_scale"]`` multiplies every random process.
    """
    rng = np.random.default_rng(spec.seed)
    n, p = int(spec.n), int(spec.p)
    grid = TimeGrid.uniform(p)
    t = grid.points
    ov = spec.overrides
    noise = float(ov.get("noise_scale", 1.0))
    c = rng.random(n) < spec.theta
    cc = c[:, None]

    if spec.bivariate:
        names = {f.name for f in fields(MaternParams)}
        params = MaternParams(**{k: float(v) for k, v in ov.items() if k in names})
        base = noise * _draw(rng, n, _matern_factor(p, params))
        e1, e2 = base[:, :p], base[:, p:]
        signal = {
            "M1": (0.5 * np.cos(80 * np.pi * t), 0.75 * np.sin(40 * np.pi * t)),
            "M2": (2 * np.cos(80 * np.pi * t), 3 * np.sin(40 * np.pi * t)),
            "M3": (np.cos(40 * np.pi * t), np.sin(40 * np.pi * t)),
        }[spec.model]
        x1 = e1 + np.where(cc, signal[0], 0.0)
        x2 = e2 + np.where(cc, signal[1], 0.0)
        sample = BivariateFunctionalSample(grid, x1, x2)
        return LabeledSample(sample, np.flatnonzero(c), spec)

    e = noise * _draw(rng, n, _powexp_factor(p, 1.0, 1.0, 1.0))
    if spec.model == "U1":
        k, mu, scale = float(ov.get("k", 6.0)), float(ov.get("mu", 0.1)), float(ov.get("c", 1.0))
        e_out = noise * _draw(rng, n, _powexp_factor(p, k, mu, scale))
        x = np.where(cc, e_out, e)
    elif spec.model == "U2":
        x = np.where(cc, 2 * np.sin(15 * np.pi * t + 4), 2 * np.sin(15 * np.pi * t)) + e
    else:
        eps = noise * _draw(rng, n, _powexp_factor(p, 0.1, 0.1, 4.0))
        if spec.model == "U3":
            x = np.where(cc, np.arctan(t) + eps, 0.1 + np.arctan(t) + e)
        elif spec.model == "U4":
            mean = 30 * t * (1 - t) ** 1.5
            x = mean + np.where(cc, eps, e)
        else:
            phase = rng.uniform(0.25, 0.5, size=n)
            wave = 0.1 * np.sin(40 * (t[None, :] + phase[:, None]) * np.pi)
            x = np.where(cc, wave + eps, e)
    return LabeledSample(FunctionalSample(grid, x), np.flatnonzero(c), spec)
