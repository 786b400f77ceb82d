"""Pointwise depths of functional data and the aggregates built from them.

Univariate depths are rank based: at every time point each curve is compared
with the other curves only through strict above/below counts, so the whole
``n x p`` depth matrix costs one sort per column.  Bivariate curves use the
pointwise simplicial depth of the planar point cloud at each time point.

Array inputs may carry leading batch dimensions (``(..., n, p)``); curves are
always along axis ``-2`` and time along axis ``-1``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.stats import rankdata

from .core import (
    BivariateFunctionalSample,
    DepthMatrix,
    FunctionalSample,
    OutOfRange,
    TooFewCurves,
    as_values,
)

__all__ = [
    "pwd_population",
    "pointwise_counts",
    "pwd_matrix",
    "pwd_external",
    "mbd",
    "tvd_pointwise",
    "tvd",
    "simplicial_column_depth",
    "pwd_matrix_bivariate",
    "pointwise_median",
    "central_region",
]


def pwd_population(p_f):
    """Population pointwise depth ``2 p (1 - p)`` of a point with CDF value ``p_f``."""
    p_f = np.asarray(p_f, dtype=float)
    if np.any((p_f < 0) | (p_f > 1)) or np.any(np.isnan(p_f)):
        raise OutOfRange("p_f must lie in [0, 1]")
    out = 2.0 * p_f * (1.0 - p_f)
    return float(out) if out.ndim == 0 else out


def _curves(sample, minimum=3) -> np.ndarray:
    x = as_values(sample)
    if x.ndim < 2:
        raise ValueError(f"expected an (n, p) array of curves, got shape {x.shape}")
    if x.shape[-2] < minimum:
        raise TooFewCurves(f"need at least {minimum} curves, got {x.shape[-2]}")
    return x


def pointwise_counts(sample):
    """Strict above/below counts of every curve against the other curves.

    Returns ``(n_above, n_below)``, integer arrays shaped like the input.
    Ties with other curves count as neither.
    """
    x = _curves(sample, minimum=1)
    n = x.shape[-2]
    n_below = rankdata(x, method="min", axis=-2).astype(np.int64) - 1
    n_above = n - rankdata(x, method="max", axis=-2).astype(np.int64)
    return n_above, n_below


def _pwd_from_counts(n_above, n_below, n):
    return (n_above * n_below + (n - 1)) / (n * (n - 1) / 2.0)


def pwd_matrix(sample):
    """Sample pointwise depth of every curve with respect to the whole sample.

    ``(n_a n_b + n - 1) / C(n, 2)`` where ``n_a``/``n_b`` count the other
    curves strictly above/below at each time point.  Returns a
    :class:`DepthMatrix` for a :class:`FunctionalSample`, otherwise an array
    of the input's shape.
    """
    x = _curves(sample)
    n_above, n_below = pointwise_counts(x)
    depth = _pwd_from_counts(n_above, n_below, x.shape[-2])
    if isinstance(sample, FunctionalSample):
        return DepthMatrix(depth)
    return depth


def pwd_external(curves, reference) -> np.ndarray:
    """Pointwise depth of curves that are not members of ``reference``.

    All ``n`` reference curves enter the counts, and the same normalisation
    with the reference ``n`` is used.
    """
    ref = _curves(reference)
    f = np.atleast_2d(as_values(curves))
    if f.shape[-1] != ref.shape[-1]:
        raise ValueError("curves and reference must share the grid")
    n = ref.shape[0]
    ref_sorted = np.sort(ref, axis=0)
    n_below = np.empty(f.shape, dtype=np.int64)
    n_above = np.empty(f.shape, dtype=np.int64)
    for j in range(f.shape[1]):
        n_below[:, j] = np.searchsorted(ref_sorted[:, j], f[:, j], side="left")
        n_above[:, j] = n - np.searchsorted(ref_sorted[:, j], f[:, j], side="right")
    return _pwd_from_counts(n_above, n_below, n)


def _depth_values(depths) -> np.ndarray:
    return depths.values if isinstance(depths, DepthMatrix) else np.asarray(depths, dtype=float)


def mbd(sample) -> np.ndarray:
    """Modified band depth (bands of two curves): time average of the pointwise depth."""
    return _depth_values(pwd_matrix(sample)).mean(axis=-1)


def tvd_pointwise(sample):
    """Pointwise total variation depth ``p_hat (1 - p_hat)``.

    ``p_hat`` is the mid-rank proportion of curves at or below the evaluated
    value: other curves strictly below count fully, ties with other curves
    and the curve itself count one half.  With this convention the value is a
    fixed increasing affine function of ``n_a n_b``, so aggregates order
    curves exactly like :func:`mbd` on tie-free data.
    """
    x = _curves(sample)
    n = x.shape[-2]
    n_above, n_below = pointwise_counts(x)
    ties = (n - 1) - n_above - n_below
    p_hat = (n_below + 0.5 * ties + 0.5) / n
    depth = p_hat * (1.0 - p_hat)
    if isinstance(sample, FunctionalSample):
        return DepthMatrix(depth)
    return depth


def tvd(sample) -> np.ndarray:
    """Total variation depth with uniform weight over the grid points."""
    return _depth_values(tvd_pointwise(sample)).mean(axis=-1)


@njit(cache=True)
def _simplicial_kernel(cols):
    # cols: (q, m, 2) planar point clouds; returns (q, m) depths
    q, m = cols.shape[0], cols.shape[1]
    total = m * (m - 1) * (m - 2) // 6
    out = np.empty((q, m))
    vx = np.empty(m)
    vy = np.empty(m)
    for c in range(q):
        for i in range(m):
            for a in range(m):
                vx[a] = cols[c, a, 0] - cols[c, i, 0]
                vy[a] = cols[c, a, 1] - cols[c, i, 1]
            outside = 0
            for a in range(m):
                if vx[a] == 0.0 and vy[a] == 0.0:
                    continue
                k = 0
                for b in range(m):
                    if b == a or (vx[b] == 0.0 and vy[b] == 0.0):
                        continue
                    cr = vx[a] * vy[b] - vy[a] * vx[b]
                    if cr > 0.0:
                        k += 1
                    elif cr == 0.0 and b > a and vx[a] * vx[b] + vy[a] * vy[b] > 0.0:
                        # same direction: order by index so each triple has one leader
                        k += 1
                outside += k * (k - 1) // 2
            out[c, i] = (total - outside) / total
    return out


def simplicial_column_depth(points) -> np.ndarray:
    """Simplicial depth of each of ``m`` planar points within the point set.

    The depth of point ``i`` is the fraction of the ``C(m, 3)`` triangles with
    vertices in the set whose closed convex hull contains it, so triangles
    with ``i`` as a vertex always count.  A point lies outside a triangle
    exactly when the triangle's vertices fit in an open half-plane bounded by
    a line through the point.  Seen from the point, each such triple has a
    unique leading vertex with the other two strictly counter-clockwise
    within a half turn, so the outside count is ``sum_a C(k_a, 2)``.
    Degenerate (collinear) triangles contain the point only if it lies on
    the segment they span.

    ``points`` has shape ``(..., m, 2)``; the result has shape ``(..., m)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of 2")
    m = pts.shape[-2]
    if m < 3:
        raise TooFewCurves(f"simplicial depth needs at least 3 points, got {m}")
    flat = np.ascontiguousarray(pts.reshape(-1, m, 2))
    return _simplicial_kernel(flat).reshape(pts.shape[:-1])


def pwd_matrix_bivariate(sample):
    """Pointwise simplicial depth of bivariate curves, one column per time point.

    Accepts a :class:`BivariateFunctionalSample` (returns a
    :class:`DepthMatrix`) or an array of shape ``(n, p, 2)``.  Cost is
    ``O(n^3)`` per time point.
    """
    if isinstance(sample, BivariateFunctionalSample):
        pts = np.stack([sample.component1, sample.component2], axis=-1)
    else:
        pts = np.asarray(sample, dtype=float)
    n = pts.shape[0]
    if n < 4:
        raise TooFewCurves(f"bivariate depth needs at least 4 curves, got {n}")
    depth = simplicial_column_depth(np.moveaxis(pts, 1, 0)).T
    if isinstance(sample, BivariateFunctionalSample):
        return DepthMatrix(depth)
    return depth


def pointwise_median(sample) -> np.ndarray:
    """Column-wise sample median (mean of the two middle values for even n)."""
    return np.median(_curves(sample, minimum=1), axis=-2)


def central_region(sample, coverage: float = 0.5, depth=None):
    """Envelope of the ``ceil(coverage * n)`` deepest curves.

    Curves are ranked by ``depth`` (MBD when omitted); equal depths keep
    sample order.  Returns ``(lower, upper, members)``.
    """
    if not 0.0 < coverage <= 1.0:
        raise OutOfRange(f"coverage must lie in (0, 1], got {coverage}")
    x = _curves(sample)
    if depth is None:
        depth = mbd(x)
    n_members = math.ceil(coverage * x.shape[0] - 1e-12)
    members = np.sort(np.argsort(-np.asarray(depth), kind="stable")[:n_members])
    return x[members].min(axis=0), x[members].max(axis=0), members
