"""Core value types and CSV ingestion.

Every array held by these types is copied on construction and marked
read-only, so instances can be shared freely between workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_SCALE_FLOOR = 1e-8


class DataError(ValueError):
    """Base class for invalid input data."""


class MissingFileError(DataError, FileNotFoundError):
    pass


class RaggedRowError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class MissingColumnError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


def _frozen(values, ndim: int, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatchError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NonNumericCellError(f"{what} has a non-finite entry at index {tuple(int(i) for i in bad)}")


@dataclass(frozen=True)
class TrainingData:
    """Training features (n x p) and outcomes (n,)."""

    features: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        X = _frozen(self.features, 2)
        y = _frozen(self.outcomes, 1)
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise DimensionMismatchError(f"training features need n >= 2 and p >= 1, got {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise DimensionMismatchError(
                f"{y.shape[0]} outcomes for {X.shape[0]} feature rows"
            )
        _check_finite(X, "training features")
        _check_finite(y, "training outcomes")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "outcomes", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "TrainingData":
        return TrainingData(self.features[rows], self.outcomes[rows])


@dataclass(frozen=True)
class TestFeatures:
    """Feature matrix (m x p) of the points to classify."""

    __test__ = False  # not a pytest class

    features: np.ndarray

    def __post_init__(self):
        X = _frozen(self.features, 2)
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise DimensionMismatchError(f"test features need m >= 2 and p >= 1, got {X.shape}")
        _check_finite(X, "test features")
        object.__setattr__(self, "features", X)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PredictionEnsemble:
    """Point predictions, per-point scale, and the B x m bootstrap matrix.

    Use :meth:`from_samples` to derive ``scale`` from the samples; the plain
    constructor trusts the caller's scale but still validates it.
    """

    point: np.ndarray
    scale: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        point = _frozen(self.point, 1)
        scale = _frozen(self.scale, 1)
        samples = _frozen(self.samples, 2)
        if samples.shape[1] != point.shape[0]:
            raise DimensionMismatchError(
                f"samples have {samples.shape[1]} columns but there are {point.shape[0]} point predictions"
            )
        if scale.shape != point.shape:
            raise DimensionMismatchError(f"scale shape {scale.shape} != point shape {point.shape}")
        if samples.shape[0] < 2:
            raise DataError(f"need at least 2 bootstrap rows, got {samples.shape[0]}")
        _check_finite(point, "point predictions")
        _check_finite(samples, "bootstrap samples")
        if not np.all(scale > 0):
            raise DataError("scale must be strictly positive")
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_samples(cls, point, samples, scale_floor: float = DEFAULT_SCALE_FLOOR):
        """Build an ensemble whose scale is the column sample sd (ddof=1), floored."""
        if not scale_floor > 0:
            raise DataError("scale_floor must be positive")
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2:
            raise DimensionMismatchError(f"samples must be 2-d, got shape {samples.shape}")
        if samples.shape[0] < 2:
            raise DataError(f"need at least 2 bootstrap rows, got {samples.shape[0]}")
        sd = samples.std(axis=0, ddof=1)
        return cls(point, np.maximum(sd, scale_floor), samples)

    @property
    def bootstrap_count(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.point.shape[0]


@dataclass(frozen=True)
class ConfidenceSetResult:
    inner: np.ndarray
    outer: np.ndarray
    threshold_a: float
    band_halfwidth_e: float
    elb: float
    eub: float
    boundary_count: int
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        inner = _frozen(np.unique(np.asarray(self.inner, dtype=np.int64)), 1, np.int64)
        outer = _frozen(np.unique(np.asarray(self.outer, dtype=np.int64)), 1, np.int64)
        if not np.isin(inner, outer).all():
            raise ValueError("inner set must be contained in the outer set")
        if self.threshold_a < 0 or self.band_halfwidth_e < 0:
            raise ValueError("threshold and band half-width must be nonnegative")
        for name in ("elb", "eub"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        object.__setattr__(self, "inner", inner)
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "flags", tuple(self.flags))

    def to_dict(self) -> dict:
        return {
            "inner": [int(i) for i in self.inner],
            "outer": [int(i) for i in self.outer],
            "a": float(self.threshold_a),
            "e": float(self.band_halfwidth_e),
            "elb": float(self.elb),
            "eub": float(self.eub),
            "boundary_count": int(self.boundary_count),
            "flags": list(self.flags),
        }


# --- CSV ingestion -----------------------------------------------------------


def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        return [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]


def _parse_matrix(rows, first_line: int, columns) -> np.ndarray:
    width = len(columns)
    out = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        line = first_line + r
        if len(row) != width:
            raise RaggedRowError(f"line {line} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise NonNumericCellError(
                    f"line {line}, column {columns[j]!r}: cannot parse {cell.strip()!r} as a number"
                ) from None
            if not math.isfinite(value):
                raise NonNumericCellError(
                    f"line {line}, column {columns[j]!r}: non-finite value {cell.strip()!r}"
                )
            out[r, j] = value
    return out


def load_table(path, has_header: bool = True, outcome_column: str | None = None):
    """Load a numeric CSV file.

    Returns :class:`TrainingData` when ``outcome_column`` names a header
    column (the remaining columns become features, in file order), otherwise
    :class:`TestFeatures` built from every column.
    """
    rows = _read_rows(path)
    if has_header:
        if not rows:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        body, first_line = rows[1:], 2
    else:
        header = [str(j) for j in range(len(rows[0]) if rows else 0)]
        body, first_line = rows, 1
    if outcome_column is not None and outcome_column not in header:
        raise MissingColumnError(f"{path}: outcome column {outcome_column!r} not in header {header}")
    if not body:
        raise DataError(f"{path}: no data rows")
    values = _parse_matrix(body, first_line, header)
    if outcome_column is None:
        return TestFeatures(values)
    j = header.index(outcome_column)
    return TrainingData(np.delete(values, j, axis=1), values[:, j])


def write_table(data: TrainingData, path, outcome_column: str = "y") -> None:
    """Write training data as CSV: features x1..xp, then the outcome column."""
    header = [f"x{j + 1}" for j in range(data.p)] + [outcome_column]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x, y in zip(data.features, data.outcomes):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def write_features(features: TestFeatures, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(features.p)])
        for x in features.features:
            w.writerow([repr(float(v)) for v in x])


def load_prediction_matrix(point_path, samples_path, scale_floor: float = DEFAULT_SCALE_FLOOR):
    """Load externally produced predictions as a :class:`PredictionEnsemble`.

    The point file holds m values (one per line or a single row); the samples
    file holds one bootstrap replicate per row. Neither has a header.
    """
    point_rows = _read_rows(point_path)
    sample_rows = _read_rows(samples_path)
    if not point_rows:
        raise DataError(f"{point_path}: no values")
    if not sample_rows:
        raise DataError(f"{samples_path}: no rows")
    if len(point_rows) == 1:
        point = _parse_matrix(point_rows, 1, list(range(len(point_rows[0]))))[0]
    else:
        point = _parse_matrix(point_rows, 1, [0])[:, 0]
    samples = _parse_matrix(sample_rows, 1, list(range(len(sample_rows[0]))))
    if samples.shape[1] != point.shape[0]:
        raise DimensionMismatchError(
            f"{samples_path} has {samples.shape[1]} columns but {point_path} has {point.shape[0]} values"
        )
    if samples.shape[0] < 2:
        raise DataError(f"{samples_path}: need at least 2 bootstrap rows, got {samples.shape[0]}")
    return PredictionEnsemble.from_samples(point, samples, scale_floor)


def write_prediction_matrix(ens: PredictionEnsemble, point_path, samples_path) -> None:
    """Dump an ensemble in the format read by :func:`load_prediction_matrix`."""
    with Path(point_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for v in ens.point:
            w.writerow([repr(float(v))])
    with Path(samples_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for row in ens.samples:
            w.writerow([repr(float(v)) for v in row])
