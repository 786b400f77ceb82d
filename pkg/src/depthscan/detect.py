"""Magnitude and shape outlier detection from pointwise depths.

Magnitude outliers come from the functional boxplot: the envelope of the
deepest half of the curves, inflated by ``factor`` times its pointwise width.
Shape outliers come from the lag-one Pearson correlation of each curve's
pointwise-depth sequence; curves whose correlation falls below the lower
``factor x IQR`` fence of the correlations are flagged.  :func:`detect` runs
the two stages in order, scoring shape on the magnitude-cleaned sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BivariateFunctionalSample,
    BoxplotFences,
    DepthMatrix,
    EmptyAfterCleaning,
    GridTooShort,
    OutlierReport,
    ShapeScores,
    TooFewCurves,
    as_values,
    validate,
)
from .depth import central_region, pwd_matrix, pwd_matrix_bivariate

__all__ = [
    "DetectConfig",
    "pairwise_depth",
    "shape_correlations",
    "boxplot_fences",
    "shape_flags",
    "magnitude_flags",
    "magnitude_flags_bivariate",
    "shape_scores",
    "five_number_summary",
    "detect",
]


@dataclass(frozen=True)
class DetectConfig:
    """Settings of the two-stage pipeline.

    ``magnitude=False`` skips the functional boxplot and scores shape on the
    full sample.
    """

    factor_shape: float = 3.0
    factor_magnitude: float = 1.5
    coverage: float = 0.5
    magnitude: bool = True


def _depth_array(depths) -> np.ndarray:
    return depths.values if isinstance(depths, DepthMatrix) else np.asarray(depths, dtype=float)


def pairwise_depth(depths) -> np.ndarray:
    """Consecutive-lag pairs ``(PWD(t_j), PWD(t_{j+1}))`` of every curve.

    Returns an array of shape ``(..., n, p - 1, 2)``.
    """
    d = _depth_array(depths)
    if d.shape[-1] < 3:
        raise GridTooShort(f"pairwise depth needs at least 3 time points, got {d.shape[-1]}")
    return np.stack([d[..., :-1], d[..., 1:]], axis=-1)


def shape_correlations(depths) -> np.ndarray:
    """Pearson correlation of each curve's pairwise-depth sequence.

    Rows whose lagged or leading depths have zero variance get ``r = 1``.
    """
    d = _depth_array(depths)
    if d.shape[-1] < 3:
        raise GridTooShort(f"pairwise depth needs at least 3 time points, got {d.shape[-1]}")
    a = d[..., :-1] - d[..., :-1].mean(axis=-1, keepdims=True)
    b = d[..., 1:] - d[..., 1:].mean(axis=-1, keepdims=True)
    saa = (a * a).sum(axis=-1)
    sbb = (b * b).sum(axis=-1)
    sab = (a * b).sum(axis=-1)
    # depths are multiples of 1/C(n,2); tiny sums of squares are rounding noise
    degenerate = (saa <= 1e-24) | (sbb <= 1e-24)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = sab / np.sqrt(saa * sbb)
    r = np.where(degenerate, 1.0, np.clip(r, -1.0, 1.0))
    return r


def boxplot_fences(values, factor: float) -> BoxplotFences:
    """Quartiles (linear interpolation between order statistics) and fences."""
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75])
    iqr = q3 - q1
    if np.isinf(factor):
        return BoxplotFences(float(q1), float(q3), float(iqr), float(factor), -np.inf, np.inf)
    return BoxplotFences(
        float(q1), float(q3), float(iqr), float(factor), float(q1 - factor * iqr), float(q3 + factor * iqr)
    )


def shape_flags(r, factor: float = 3.0, indices=None) -> ShapeScores:
    """Flag correlations strictly below the lower boxplot fence."""
    r = np.asarray(r, dtype=float)
    if r.size < 5:
        raise TooFewCurves(f"shape flags need at least 5 curves, got {r.size}")
    fences = boxplot_fences(r, factor)
    return ShapeScores(r, fences, r < fences.lower, indices)


def shape_scores(sample, factor: float = 3.0, indices=None) -> ShapeScores:
    """Depth, correlation and flag steps of the shape stage for one sample."""
    if isinstance(sample, BivariateFunctionalSample):
        depths = pwd_matrix_bivariate(sample)
    else:
        depths = pwd_matrix(sample)
    return shape_flags(shape_correlations(depths), factor, indices)


def _envelope_flags(x, lower, upper, factor):
    width = upper - lower
    # inflate around the envelope; strict exceedance flags
    lo, hi = lower - factor * width, upper + factor * width
    return ((x > hi) | (x < lo)).any(axis=-1)


def magnitude_flags(sample, factor: float = 1.5, coverage: float = 0.5, depth=None) -> np.ndarray:
    """Indices of curves leaving the inflated central region at any grid point.

    The central region is the envelope of the ``ceil(coverage * n)`` curves
    with largest MBD (or largest ``depth`` if given).
    """
    x = as_values(sample)
    lower, upper, _ = central_region(x, coverage, depth=depth)
    return np.flatnonzero(_envelope_flags(x, lower, upper, factor))


def magnitude_flags_bivariate(
    sample: BivariateFunctionalSample, factor: float = 1.5, coverage: float = 0.5, depths=None
) -> np.ndarray:
    """Functional boxplot per component, curves ranked by mean simplicial depth.

    A curve is flagged when either component leaves its inflated envelope.
    """
    if depths is None:
        depths = pwd_matrix_bivariate(sample)
    order_depth = _depth_array(depths).mean(axis=-1)
    flags = np.zeros(sample.n, dtype=bool)
    for comp in (sample.component1, sample.component2):
        lower, upper, _ = central_region(comp, coverage, depth=order_depth)
        flags |= _envelope_flags(comp, lower, upper, factor)
    return np.flatnonzero(flags)


def five_number_summary(depths) -> np.ndarray:
    """``[min, q1, median, q3, max]`` of every depth row, shape ``(n, 5)``."""
    d = _depth_array(depths)
    return np.percentile(d, [0, 25, 50, 75, 100], axis=-1).T


def detect(sample, config: DetectConfig = None) -> OutlierReport:
    """Run magnitude detection, then shape detection on the remaining curves."""
    config = config or DetectConfig()
    validate(sample)
    bivariate = isinstance(sample, BivariateFunctionalSample)
    if bivariate:
        full_depths = pwd_matrix_bivariate(sample)
    else:
        full_depths = pwd_matrix(sample)
    depth_rows = _depth_array(full_depths)

    if config.magnitude:
        if bivariate:
            magnitude = magnitude_flags_bivariate(
                sample, config.factor_magnitude, config.coverage, depths=depth_rows
            )
        else:
            magnitude = magnitude_flags(
                sample, config.factor_magnitude, config.coverage, depth=depth_rows.mean(axis=1)
            )
    else:
        magnitude = np.array([], dtype=int)

    keep = np.setdiff1d(np.arange(sample.n), magnitude)
    if keep.size < 5:
        raise EmptyAfterCleaning(
            f"only {keep.size} curves remain after magnitude detection; shape scoring needs 5"
        )
    if keep.size == sample.n:
        depths = depth_rows
    else:
        clean = sample.subset(keep)
        depths = _depth_array(pwd_matrix_bivariate(clean) if bivariate else pwd_matrix(clean))
    scores = shape_flags(shape_correlations(depths), config.factor_shape, indices=keep)

    return OutlierReport(
        magnitude_indices=tuple(magnitude.tolist()),
        shape_indices=tuple(scores.flagged.tolist()),
        depth_summary=five_number_summary(depth_rows),
        shape_scores=scores,
        median_index=int(np.argmax(depth_rows.mean(axis=1))),
    )
