import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from depthscan.core import (
    BivariateFunctionalSample,
    BoxplotFences,
    FunctionalSample,
    GridNotIncreasing,
    GridTooShort,
    ModelSpec,
    NonFiniteValue,
    OutlierReport,
    OutOfRange,
    ShapeMismatch,
    ShapeScores,
    TestResult,
    TimeGrid,
    TooFewCurves,
    validate,
)
from depthscan.depth import pwd_matrix
from depthscan.detect import detect


def roundtrip(obj):
    return type(obj).from_dict(json.loads(json.dumps(obj.to_dict())))


def test_validate_accepts_finite_sample():
    s = FunctionalSample.from_array(np.arange(15.0).reshape(3, 5))
    assert validate(s) is s
    assert s.ids == ("0", "1", "2")


def test_grid_with_tie_rejected():
    with pytest.raises(GridNotIncreasing):
        TimeGrid([0.0, 0.0, 1.0])


def test_grid_errors():
    with pytest.raises(GridTooShort):
        TimeGrid([0.0])
    with pytest.raises(NonFiniteValue):
        TimeGrid([0.0, np.nan])


def test_two_curves_too_few():
    s = FunctionalSample.from_array(np.zeros((2, 4)))
    with pytest.raises(TooFewCurves):
        validate(s)


def test_sample_shape_and_values_checked():
    with pytest.raises(ShapeMismatch):
        FunctionalSample(TimeGrid.uniform(4), np.zeros((3, 5)))
    with pytest.raises(NonFiniteValue):
        FunctionalSample(TimeGrid.uniform(2), [[0.0, np.inf]] * 3)
    with pytest.raises(ShapeMismatch):
        FunctionalSample(TimeGrid.uniform(2), np.zeros((3, 2)), ids=["a", "a", "b"])
    with pytest.raises(ShapeMismatch):
        BivariateFunctionalSample(TimeGrid.uniform(2), np.zeros((3, 2)), np.zeros((4, 2)))


def test_arrays_are_read_only():
    s = FunctionalSample.from_array(np.ones((3, 3)))
    with pytest.raises(ValueError):
        s.values[0, 0] = 2.0


def test_modelspec_validation():
    with pytest.raises(OutOfRange):
        ModelSpec("U7")
    with pytest.raises(OutOfRange):
        ModelSpec("U1", theta=-0.1)
    assert ModelSpec("M2").bivariate
    assert ModelSpec("U1").replace(seed=3).seed == 3


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(arrays(float, st.tuples(st.integers(3, 6), st.integers(2, 5)), elements=finite))
def test_sample_roundtrip(values):
    s = FunctionalSample.from_array(values)
    assert roundtrip(s) == s
    b = BivariateFunctionalSample(s.grid, values, -values)
    assert roundtrip(b) == b


@given(arrays(float, st.tuples(st.integers(3, 8), st.integers(2, 6)), elements=finite))
def test_depth_matrix_roundtrip_and_positive(values):
    d = pwd_matrix(FunctionalSample.from_array(values))
    assert roundtrip(d) == d
    n = values.shape[0]
    assert np.all(d.values >= (n - 1) / (n * (n - 1) / 2) - 1e-15)
    assert np.all(d.values <= 1.0)


def test_record_roundtrips():
    f = BoxplotFences(0.1, 0.3, 0.2, 3.0, -0.5, 0.9)
    assert roundtrip(f) == f
    t = TestResult(2.0, 1.5, 0.05, 0.01, True, 500)
    assert roundtrip(t) == t
    m = ModelSpec("U1", 50, 20, 0.2, 9, {"k": 2.0, "mu": 0.5})
    assert roundtrip(m) == m
    sc = ShapeScores(np.array([0.9, 0.1]), f, np.array([False, True]))
    assert roundtrip(sc) == sc


def test_report_roundtrip_and_disjoint():
    rng = np.random.default_rng(1)
    s = FunctionalSample.from_array(np.cumsum(rng.normal(size=(20, 15)), axis=1))
    rep = detect(s)
    assert roundtrip(rep) == rep
    assert not set(rep.magnitude_indices) & set(rep.shape_indices)
    with pytest.raises(ValueError):
        OutlierReport((1,), (1,), rep.depth_summary, rep.shape_scores, 0)
