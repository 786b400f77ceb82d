"""Depth-based detection of magnitude and shape outliers in functional data."""

__version__ = "0.1.0"

from .core import (
    BivariateFunctionalSample,
    BoxplotFences,
    DepthMatrix,
    DepthScanError,
    DomainError,
    EmptyAfterCleaning,
    FitFailure,
    FunctionalSample,
    GridNotIncreasing,
    GridTooShort,
    LengthMismatch,
    ModelSpec,
    NonFiniteValue,
    NotPositiveDefinite,
    OutlierReport,
    OutOfRange,
    ShapeMismatch,
    ShapeScores,
    TestResult,
    TimeGrid,
    TooFewCurves,
    validate,
)
from .depth import mbd, pwd_matrix, pwd_matrix_bivariate, simplicial_column_depth, tvd
from .detect import DetectConfig, detect, shape_correlations, shape_flags
from .shapetest import existence_test, fit_null_model, qn_scale
from .simulate import generate

__all__ = [
    "BivariateFunctionalSample",
    "BoxplotFences",
    "DepthMatrix",
    "DepthScanError",
    "DomainError",
    "EmptyAfterCleaning",
    "FitFailure",
    "FunctionalSample",
    "GridNotIncreasing",
    "GridTooShort",
    "LengthMismatch",
    "ModelSpec",
    "NonFiniteValue",
    "NotPositiveDefinite",
    "OutlierReport",
    "OutOfRange",
    "ShapeMismatch",
    "ShapeScores",
    "TestResult",
    "TimeGrid",
    "TooFewCurves",
    "validate",
    "mbd",
    "pwd_matrix",
    "pwd_matrix_bivariate",
    "simplicial_column_depth",
    "tvd",
    "DetectConfig",
    "detect",
    "shape_correlations",
    "shape_flags",
    "existence_test",
    "fit_null_model",
    "qn_scale",
    "generate",
]
