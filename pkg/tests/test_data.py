import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from excursion_sets import (
    ConfidenceSetResult,
    DataError,
    DimensionMismatchError,
    MissingColumnError,
    MissingFileError,
    NonNumericCellError,
    PredictionEnsemble,
    RaggedRowError,
    TestFeatures,
    TrainingData,
    load_prediction_matrix,
    load_table,
    write_prediction_matrix,
    write_table,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_table_training(tmp_path):
    f = _write(tmp_path / "t.csv", "y,x1\n1,0.5\n0,-0.5\n1,2.0\n")
    data = load_table(f, outcome_column="y")
    assert isinstance(data, TrainingData)
    assert (data.n, data.p) == (3, 1)
    np.testing.assert_array_equal(data.outcomes, [1, 0, 1])
    np.testing.assert_array_equal(data.features[:, 0], [0.5, -0.5, 2.0])


def test_load_table_features_keeps_column_order(tmp_path):
    f = _write(tmp_path / "t.csv", "y,x1\n1,0.5\n0,-0.5\n1,2.0\n")
    feats = load_table(f)
    assert isinstance(feats, TestFeatures)
    assert (feats.m, feats.p) == (3, 2)
    np.testing.assert_array_equal(feats.features[0], [1, 0.5])


def test_load_table_without_header(tmp_path):
    f = _write(tmp_path / "t.csv", "1,2\n3,4\n")
    feats = load_table(f, has_header=False)
    np.testing.assert_array_equal(feats.features, [[1, 2], [3, 4]])


def test_nan_cell_is_named(tmp_path):
    f = _write(tmp_path / "t.csv", "y,x1\n1,0.5\n0,NaN\n")
    with pytest.raises(NonNumericCellError, match=r"line 3, column 'x1'"):
        load_table(f, outcome_column="y")


def test_text_cell_is_named(tmp_path):
    f = _write(tmp_path / "t.csv", "y,x1\n1,abc\n0,1\n")
    with pytest.raises(NonNumericCellError, match=r"line 2, column 'x1'.*'abc'"):
        load_table(f, outcome_column="y")


def test_ragged_row(tmp_path):
    f = _write(tmp_path / "t.csv", "y,x1\n1,0.5\n0\n")
    with pytest.raises(RaggedRowError, match="line 3"):
        load_table(f, outcome_column="y")


def test_missing_file(tmp_path):
    with pytest.raises(MissingFileError):
        load_table(tmp_path / "nope.csv")


def test_missing_outcome_column(tmp_path):
    f = _write(tmp_path / "t.csv", "y,x1\n1,0.5\n0,1\n")
    with pytest.raises(MissingColumnError, match="'z'"):
        load_table(f, outcome_column="z")


def test_error_types_are_distinct():
    kinds = {MissingFileError, RaggedRowError, NonNumericCellError, MissingColumnError}
    assert len(kinds) == 4
    assert all(issubclass(k, DataError) for k in kinds)


def test_training_data_validation():
    with pytest.raises(DimensionMismatchError):
        TrainingData(np.zeros((3, 1)), np.zeros(2))
    with pytest.raises(DimensionMismatchError):
        TrainingData(np.zeros((1, 1)), np.zeros(1))
    with pytest.raises(NonNumericCellError):
        TrainingData([[0.0], [np.inf]], [1.0, 2.0])


def test_arrays_are_read_only():
    data = TrainingData(np.zeros((3, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        data.features[0, 0] = 1.0


def test_prediction_matrix_constant_columns_floored(tmp_path):
    pt = _write(tmp_path / "p.csv", "1\n2\n")
    sm = _write(tmp_path / "s.csv", "1,2\n1,2\n")
    ens = load_prediction_matrix(pt, sm)
    np.testing.assert_array_equal(ens.scale, [1e-8, 1e-8])


def test_prediction_matrix_sample_sd(tmp_path):
    pt = _write(tmp_path / "p.csv", "0\n")
    sm = _write(tmp_path / "s.csv", "1\n-1\n")
    ens = load_prediction_matrix(pt, sm)
    # sd of {1, -1} with divisor B - 1 = 1
    assert ens.scale[0] == pytest.approx(math.sqrt(2), abs=1e-15)


def test_prediction_matrix_point_as_single_row(tmp_path):
    pt = _write(tmp_path / "p.csv", "1,2,3\n")
    sm = _write(tmp_path / "s.csv", "1,2,3\n0,1,2\n")
    assert load_prediction_matrix(pt, sm).m == 3


def test_prediction_matrix_dimension_mismatch(tmp_path):
    pt = _write(tmp_path / "p.csv", "1\n2\n3\n")
    sm = _write(tmp_path / "s.csv", "1,2\n1,2\n1,2\n")
    with pytest.raises(DimensionMismatchError):
        load_prediction_matrix(pt, sm)


def test_prediction_matrix_needs_two_rows(tmp_path):
    pt = _write(tmp_path / "p.csv", "1\n2\n")
    sm = _write(tmp_path / "s.csv", "1,2\n")
    with pytest.raises(DataError):
        load_prediction_matrix(pt, sm)


def test_ensemble_rejects_nonpositive_scale():
    with pytest.raises(DataError):
        PredictionEnsemble(np.zeros(2), np.array([1.0, 0.0]), np.zeros((2, 2)))


def test_result_invariants():
    res = ConfidenceSetResult([1], [0, 1], 1.0, 0.5, 0.9, 0.95, 2)
    assert res.to_dict() == {
        "inner": [1],
        "outer": [0, 1],
        "a": 1.0,
        "e": 0.5,
        "elb": 0.9,
        "eub": 0.95,
        "boundary_count": 2,
        "flags": [],
    }
    with pytest.raises(ValueError):
        ConfidenceSetResult([2], [0, 1], 1.0, 0.5, 0.9, 0.95, 2)
    with pytest.raises(ValueError):
        ConfidenceSetResult([], [0], 1.0, 0.5, 1.2, 0.95, 2)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, min_side=2, max_side=6), elements=finite))
def test_table_round_trip_is_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    data = TrainingData(values[:, 1:] if values.shape[1] > 1 else values, values[:, 0])
    write_table(data, path)
    back = load_table(path, outcome_column="y")
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.outcomes, data.outcomes)


def test_prediction_matrix_round_trip(tmp_path, rng):
    samples = rng.standard_normal((7, 4))
    ens = PredictionEnsemble.from_samples(rng.standard_normal(4), samples)
    write_prediction_matrix(ens, tmp_path / "p.csv", tmp_path / "s.csv")
    back = load_prediction_matrix(tmp_path / "p.csv", tmp_path / "s.csv")
    np.testing.assert_array_equal(back.point, ens.point)
    np.testing.assert_array_equal(back.samples, ens.samples)
    np.testing.assert_array_equal(back.scale, np.std(samples, axis=0, ddof=1))
