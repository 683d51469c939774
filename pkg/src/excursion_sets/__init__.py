"""Confidence sets for outcome excursions over a set of test feature points."""

from .baselines import IntervalBands, baseline_sets, invert_bands, pointwise_bands, realized_variant, simultaneous_bands
from .bootstrap import BootstrapConfig, BootstrapError, bootstrap_expected, bootstrap_realized
from .data import (
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
from .excursion import (
    Band,
    SignedDistances,
    StandardizedResiduals,
    calibrate_threshold,
    construct,
    construct_asymptotic,
    construct_corollary,
    est_lower_bound,
    est_upper_bound,
    make_band,
    signed_distances,
    standardize,
)
from .learners import FittedPredictor, MLPConfig, PredictorSpec, fit, predict

__version__ = "0.1.0"
