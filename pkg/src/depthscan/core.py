"""Shared domain types: time grids, functional samples, depth matrices and reports.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be passed between workers without defensive copies.  Every type has a
``to_dict``/``from_dict`` pair producing plain JSON-compatible structures.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "DepthScanError",
    "NonFiniteValue",
    "GridNotIncreasing",
    "TooFewCurves",
    "ShapeMismatch",
    "GridTooShort",
    "OutOfRange",
    "LengthMismatch",
    "DomainError",
    "FitFailure",
    "NotPositiveDefinite",
    "EmptyAfterCleaning",
    "TimeGrid",
    "FunctionalSample",
    "BivariateFunctionalSample",
    "DepthMatrix",
    "BoxplotFences",
    "ShapeScores",
    "TestResult",
    "OutlierReport",
    "ModelSpec",
    "MODELS",
    "validate",
]


class DepthScanError(ValueError):
    """Base class for all input and numerical errors raised by this package."""


class NonFiniteValue(DepthScanError):
    pass


class GridNotIncreasing(DepthScanError):
    pass


class TooFewCurves(DepthScanError):
    pass


class ShapeMismatch(DepthScanError):
    pass


class GridTooShort(DepthScanError):
    pass


class OutOfRange(DepthScanError):
    pass


class LengthMismatch(DepthScanError):
    pass


class DomainError(DepthScanError):
    pass


class EmptyAfterCleaning(DepthScanError):
    pass


class NotPositiveDefinite(DepthScanError, np.linalg.LinAlgError):
    pass


class FitFailure(DepthScanError):
    """Covariance model could not be fitted.

    ``params`` carries whatever was estimated before giving up, e.g. ``k=0``
    for a sample with no dispersion.
    """

    def __init__(self, message: str, params: Optional[dict] = None):
        super().__init__(message)
        self.params = params or {}


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing, finite time points shared by every curve."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen_array(self.points)
        if pts.ndim != 1:
            raise ShapeMismatch(f"grid must be one-dimensional, got shape {pts.shape}")
        if pts.size < 2:
            raise GridTooShort(f"grid needs at least 2 points, got {pts.size}")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteValue("grid contains non-finite values")
        if np.any(np.diff(pts) <= 0):
            raise GridNotIncreasing("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, p: int, start: float = 0.0, stop: float = 1.0) -> "TimeGrid":
        return cls(np.linspace(start, stop, p))

    @property
    def p(self) -> int:
        return self.points.size

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.points, other.points)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TimeGrid":
        return cls(np.asarray(d["points"], dtype=float))


def _check_matrix(values, grid: TimeGrid, name: str) -> np.ndarray:
    arr = _frozen_array(values)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be an n x p matrix, got shape {arr.shape}")
    if arr.shape[1] != grid.p:
        raise ShapeMismatch(f"{name} has {arr.shape[1]} columns but the grid has {grid.p} points")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains non-finite values")
    return arr


def _check_ids(ids, n: int) -> tuple:
    if ids is None:
        return tuple(str(i) for i in range(n))
    ids = tuple(str(i) for i in ids)
    if len(ids) != n:
        raise ShapeMismatch(f"{len(ids)} ids given for {n} curves")
    if len(set(ids)) != n:
        raise ShapeMismatch("curve ids must be unique")
    return ids


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """``n`` curves observed on a common grid; row ``i`` is curve ``i``."""

    grid: TimeGrid
    values: np.ndarray
    ids: tuple = None

    def __post_init__(self):
        grid = self.grid if isinstance(self.grid, TimeGrid) else TimeGrid(self.grid)
        object.__setattr__(self, "grid", grid)
        values = _check_matrix(self.values, grid, "values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", _check_ids(self.ids, values.shape[0]))

    @classmethod
    def from_array(cls, values, grid=None, ids=None) -> "FunctionalSample":
        values = np.asarray(values, dtype=float)
        if grid is None:
            grid = TimeGrid.uniform(values.shape[-1])
        return cls(grid, values, ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def subset(self, indices) -> "FunctionalSample":
        indices = np.asarray(indices, dtype=int)
        return FunctionalSample(self.grid, self.values[indices], [self.ids[i] for i in indices])

    def __eq__(self, other):
        return (
            isinstance(other, FunctionalSample)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
            and self.ids == other.ids
        )

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "values": self.values.tolist(), "ids": list(self.ids)}

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionalSample":
        return cls(TimeGrid.from_dict(d["grid"]), np.asarray(d["values"], dtype=float), d["ids"])


@dataclass(frozen=True, eq=False)
class BivariateFunctionalSample:
    """Two functional components observed on the same curves and grid."""

    grid: TimeGrid
    component1: np.ndarray
    component2: np.ndarray
    ids: tuple = None

    def __post_init__(self):
        grid = self.grid if isinstance(self.grid, TimeGrid) else TimeGrid(self.grid)
        object.__setattr__(self, "grid", grid)
        c1 = _check_matrix(self.component1, grid, "component1")
        c2 = _check_matrix(self.component2, grid, "component2")
        if c1.shape != c2.shape:
            raise ShapeMismatch(f"component shapes differ: {c1.shape} vs {c2.shape}")
        object.__setattr__(self, "component1", c1)
        object.__setattr__(self, "component2", c2)
        object.__setattr__(self, "ids", _check_ids(self.ids, c1.shape[0]))

    @property
    def n(self) -> int:
        return self.component1.shape[0]

    @property
    def p(self) -> int:
        return self.component1.shape[1]

    def components(self) -> tuple:
        return (
            FunctionalSample(self.grid, self.component1, self.ids),
            FunctionalSample(self.grid, self.component2, self.ids),
        )

    def subset(self, indices) -> "BivariateFunctionalSample":
        indices = np.asarray(indices, dtype=int)
        return BivariateFunctionalSample(
            self.grid, self.component1[indices], self.component2[indices], [self.ids[i] for i in indices]
        )

    def __eq__(self, other):
        return (
            isinstance(other, BivariateFunctionalSample)
            and self.grid == other.grid
            and np.array_equal(self.component1, other.component1)
            and np.array_equal(self.component2, other.component2)
            and self.ids == other.ids
        )

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "component1": self.component1.tolist(),
            "component2": self.component2.tolist(),
            "ids": list(self.ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BivariateFunctionalSample":
        return cls(
            TimeGrid.from_dict(d["grid"]),
            np.asarray(d["component1"], dtype=float),
            np.asarray(d["component2"], dtype=float),
            d["ids"],
        )


def validate(sample):
    """Check a (bivariate) functional sample and return it unchanged.

    Construction already enforces finiteness, grid ordering and matching
    shapes; this additionally requires at least three curves, the minimum for
    any pointwise depth.
    """
    if isinstance(sample, (FunctionalSample, BivariateFunctionalSample)):
        # re-run the constructor checks in case the object was built unusually
        type(sample).__post_init__(sample)
    else:
        raise TypeError(f"expected a functional sample, got {type(sample).__name__}")
    if sample.n < 3:
        raise TooFewCurves(f"depth computations need at least 3 curves, got {sample.n}")
    return sample


@dataclass(frozen=True, eq=False)
class DepthMatrix:
    """Sample pointwise depths, ``values[i, j]`` for curve ``i`` at ``t_j``."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        return isinstance(other, DepthMatrix) and np.array_equal(self.values, other.values)

    def to_dict(self) -> dict:
        return {"values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DepthMatrix":
        return cls(np.asarray(d["values"], dtype=float))


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (list, tuple)):
        return [_plain(o) for o in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


class _Record:
    """Mixin giving flat dataclasses a JSON round trip."""

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**d)


@dataclass(frozen=True)
class BoxplotFences(_Record):
    q1: float
    q3: float
    iqr: float
    factor: float
    lower: float
    upper: float


@dataclass(frozen=True, eq=False)
class ShapeScores:
    """Pairwise-depth correlations of the scored curves and their boxplot flags.

    ``indices`` maps each entry back to the curve's position in the sample
    the report refers to.
    """

    r: np.ndarray
    fences: BoxplotFences
    flags: np.ndarray
    indices: np.ndarray = None

    def __post_init__(self):
        r = _frozen_array(self.r)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "flags", _frozen_array(self.flags, dtype=bool))
        idx = np.arange(r.size) if self.indices is None else self.indices
        object.__setattr__(self, "indices", _frozen_array(idx, dtype=int))
        if not (self.flags.shape == r.shape == self.indices.shape):
            raise ShapeMismatch("r, flags and indices must have equal length")

    @property
    def lower_fence(self) -> float:
        return self.fences.lower

    @property
    def flagged(self) -> np.ndarray:
        """Sample indices of flagged curves."""
        return self.indices[self.flags]

    def __eq__(self, other):
        return (
            isinstance(other, ShapeScores)
            and np.array_equal(self.r, other.r)
            and self.fences == other.fences
            and np.array_equal(self.flags, other.flags)
            and np.array_equal(self.indices, other.indices)
        )

    def to_dict(self) -> dict:
        return {
            "r": self.r.tolist(),
            "fences": self.fences.to_dict(),
            "flags": self.flags.tolist(),
            "indices": self.indices.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeScores":
        return cls(d["r"], BoxplotFences.from_dict(d["fences"]), d["flags"], d["indices"])


@dataclass(frozen=True)
class TestResult(_Record):
    """Outcome of the bootstrap test for the existence of shape outliers."""

    __test__ = False  # keep pytest from collecting this class

    statistic: float
    critical_value: float
    alpha: float
    p_value_estimate: float
    reject: bool
    B: int


@dataclass(frozen=True, eq=False)
class OutlierReport:
    """Result of the two-stage detection pipeline.

    Index sets refer to rows of the original sample.  ``depth_summary`` holds
    ``[min, q1, median, q3, max]`` of each curve's pointwise-depth row in the
    full sample; ``median_index`` is the deepest curve.
    """

    magnitude_indices: tuple
    shape_indices: tuple
    depth_summary: np.ndarray
    shape_scores: ShapeScores
    median_index: int
    test_result: Optional[TestResult] = None

    def __post_init__(self):
        mag = tuple(sorted(int(i) for i in self.magnitude_indices))
        shp = tuple(sorted(int(i) for i in self.shape_indices))
        if set(mag) & set(shp):
            raise DepthScanError("a curve cannot be both a magnitude and a shape outlier")
        object.__setattr__(self, "magnitude_indices", mag)
        object.__setattr__(self, "shape_indices", shp)
        object.__setattr__(self, "depth_summary", _frozen_array(self.depth_summary))
        object.__setattr__(self, "median_index", int(self.median_index))

    @property
    def outlier_indices(self) -> tuple:
        return tuple(sorted(self.magnitude_indices + self.shape_indices))

    def __eq__(self, other):
        return (
            isinstance(other, OutlierReport)
            and self.magnitude_indices == other.magnitude_indices
            and self.shape_indices == other.shape_indices
            and np.array_equal(self.depth_summary, other.depth_summary)
            and self.shape_scores == other.shape_scores
            and self.median_index == other.median_index
            and self.test_result == other.test_result
        )

    def to_dict(self) -> dict:
        return {
            "magnitude_indices": list(self.magnitude_indices),
            "shape_indices": list(self.shape_indices),
            "depth_summary": self.depth_summary.tolist(),
            "shape_scores": self.shape_scores.to_dict(),
            "median_index": self.median_index,
            "test_result": None if self.test_result is None else self.test_result.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OutlierReport":
        test = d.get("test_result")
        return cls(
            d["magnitude_indices"],
            d["shape_indices"],
            np.asarray(d["depth_summary"], dtype=float),
            ShapeScores.from_dict(d["shape_scores"]),
            d["median_index"],
            None if test is None else TestResult.from_dict(test),
        )


MODELS = ("U1", "U2", "U3", "U4", "U5", "M1", "M2", "M3")


@dataclass(frozen=True)
class ModelSpec(_Record):
    """Parameterisation of one simulation model.

    ``overrides`` accepts ``k``, ``mu``, ``c`` (outlier covariance of U1) and
    any :class:`~depthscan.simulate.MaternParams` field for M1-M3, plus
    ``noise_scale`` to shrink the base process (0 gives deterministic curves).
    """

    model: str = "U1"
    n: int = 100
    p: int = 50
    theta: float = 0.1
    seed: int = 0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise OutOfRange(f"unknown model {self.model!r}; expected one of {', '.join(MODELS)}")
        if int(self.n) < 1 or int(self.p) < 2:
            raise OutOfRange(f"need n >= 1 and p >= 2, got n={self.n}, p={self.p}")
        if not 0.0 <= float(self.theta) <= 1.0:
            raise OutOfRange(f"contamination rate must lie in [0, 1], got {self.theta}")
        object.__setattr__(self, "overrides", dict(self.overrides or {}))

    @property
    def bivariate(self) -> bool:
        return self.model.startswith("M")

    def replace(self, **changes) -> "ModelSpec":
        return dataclasses.replace(self, **changes)


def as_values(sample) -> np.ndarray:
    """Return the curve matrix of a sample, or the array itself."""
    if isinstance(sample, FunctionalSample):
        return sample.values
    return np.asarray(sample, dtype=float)
