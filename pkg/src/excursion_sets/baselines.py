"""Reference confidence sets obtained by inverting confidence intervals.

Quantiles use linear interpolation between order statistics (numpy's
default ``method="linear"``) everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PredictionEnsemble
from .excursion import standardize

KINDS = ("pointwise", "simultaneous")


@dataclass(frozen=True)
class IntervalBands:
    lower: np.ndarray
    upper: np.ndarray
    kind: str

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float)
        upper = np.array(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if np.any(lower > upper):
            raise ValueError("lower limit exceeds upper limit")
        if self.kind not in KINDS:
            raise ValueError(f"unknown band kind {self.kind!r}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")


def pointwise_bands(ens: PredictionEnsemble, alpha: float) -> IntervalBands:
    """Per-point alpha/2 and 1 - alpha/2 quantiles of the bootstrap predictions."""
    _check_alpha(alpha)
    lower, upper = np.quantile(ens.samples, [alpha / 2, 1 - alpha / 2], axis=0)
    return IntervalBands(lower, upper, "pointwise")


def simultaneous_bands(ens: PredictionEnsemble, alpha: float) -> IntervalBands:
    """Sup-|g| bootstrap band: point +/- q * scale with q the (1 - alpha)
    quantile of the row-wise maximum absolute standardized residual."""
    _check_alpha(alpha)
    sup = np.abs(standardize(ens).g).max(axis=1)
    q = np.quantile(sup, 1 - alpha)
    return IntervalBands(ens.point - q * ens.scale, ens.point + q * ens.scale, "simultaneous")


def invert_bands(bands: IntervalBands, c: float) -> tuple[np.ndarray, np.ndarray]:
    return np.flatnonzero(bands.lower >= c), np.flatnonzero(bands.upper >= c)


def baseline_sets(ens: PredictionEnsemble, alpha: float, c: float, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """Inner/outer sets from pointwise (``"ci"``) or simultaneous (``"sci"``) bands.

    Works unchanged on a realized-outcome ensemble, whose samples already
    carry the out-of-bag residual noise.
    """
    if kind in ("ci", "pointwise"):
        bands = pointwise_bands(ens, alpha)
    elif kind in ("sci", "simultaneous"):
        bands = simultaneous_bands(ens, alpha)
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    return invert_bands(bands, c)


def realized_variant(ens_realized: PredictionEnsemble, alpha: float, c: float, kind: str = "sci"):
    """Baseline sets for the realized outcome, from a ``bootstrap_realized`` ensemble."""
    return baseline_sets(ens_realized, alpha, c, kind)
