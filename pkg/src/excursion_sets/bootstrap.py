"""Nonparametric bootstrap engines producing a :class:`PredictionEnsemble`.

``bootstrap_expected`` targets the expected outcome f(x): every replicate
refits the model on a with-replacement resample of the training pairs.
``bootstrap_realized`` targets f(x) + noise: each replicate's test
predictions are perturbed by residuals drawn from that replicate's
out-of-bag rows.

Replicate b draws all of its randomness from ``SeedSequence(rng_seed)``'s
b-th spawned child, so any subset of replicates can be recomputed alone and
in any order with bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DEFAULT_SCALE_FLOOR, DimensionMismatchError, PredictionEnsemble, TestFeatures, TrainingData
from .learners import PredictorSpec, fit, fit_many, predict

MAX_OOB_RETRIES = 100


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BootstrapConfig:
    B: int
    rng_seed: int = 0
    scale_floor: float = DEFAULT_SCALE_FLOOR

    def __post_init__(self):
        if self.B < 2:
            raise ValueError(f"B must be at least 2, got {self.B}")
        if not self.scale_floor > 0:
            raise ValueError("scale_floor must be positive")


def _seeds(cfg: BootstrapConfig):
    """Seed for the full-data fit and one child per replicate."""
    root = np.random.SeedSequence(cfg.rng_seed)
    full, replicates = root.spawn(2)
    return full, replicates.spawn(cfg.B)


def resample_indices(n: int, seed) -> tuple[np.ndarray, np.random.Generator]:
    """Draw n row indices uniformly with replacement; return the generator too."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, n, size=n), rng


def _check(train: TrainingData, test: TestFeatures):
    if train.p != test.p:
        raise DimensionMismatchError(f"training data has p={train.p} but test features have p={test.p}")


def _fit_replicates(spec, train, resamples, seeds):
    datasets = [train.subset(idx) for idx in resamples]
    try:
        return fit_many(spec, datasets, seeds)
    except Exception:
        pass
    # locate the offending replicate so the error names it
    models = []
    for b, (data, seed) in enumerate(zip(datasets, seeds)):
        try:
            models.append(fit(spec, data, seed))
        except Exception as exc:
            raise BootstrapError(f"bootstrap replicate {b} could not be fitted: {exc}") from exc
    return models


def _point(spec, train, test, seed):
    return predict(fit(spec, train, seed), test)


def bootstrap_expected(spec: PredictorSpec, train: TrainingData, test: TestFeatures, cfg: BootstrapConfig) -> PredictionEnsemble:
    _check(train, test)
    full_seed, rep_seeds = _seeds(cfg)
    point = _point(spec, train, test, full_seed)
    resamples, fit_seeds = [], []
    for seed in rep_seeds:
        idx, rng = resample_indices(train.n, seed)
        resamples.append(idx)
        fit_seeds.append(rng.integers(2**63))
    models = _fit_replicates(spec, train, resamples, fit_seeds)
    samples = np.stack([predict(model, test) for model in models])
    return PredictionEnsemble.from_samples(point, samples, cfg.scale_floor)


def bootstrap_realized(spec: PredictorSpec, train: TrainingData, test: TestFeatures, cfg: BootstrapConfig) -> PredictionEnsemble:
    _check(train, test)
    full_seed, rep_seeds = _seeds(cfg)
    point = _point(spec, train, test, full_seed)
    resamples, oobs, rngs, fit_seeds = [], [], [], []
    for b, seed in enumerate(rep_seeds):
        rng = np.random.default_rng(seed)
        for _ in range(MAX_OOB_RETRIES):
            idx = rng.integers(0, train.n, size=train.n)
            oob = np.setdiff1d(np.arange(train.n), idx)
            if oob.size:
                break
        else:
            raise BootstrapError(f"bootstrap replicate {b}: empty out-of-bag set after {MAX_OOB_RETRIES} draws")
        resamples.append(idx)
        oobs.append(oob)
        fit_seeds.append(rng.integers(2**63))
        rngs.append(rng)
    models = _fit_replicates(spec, train, resamples, fit_seeds)
    samples = np.empty((cfg.B, test.m))
    for b, (model, oob, rng) in enumerate(zip(models, oobs, rngs)):
        resid = train.outcomes[oob] - predict(model, train.features[oob])
        samples[b] = predict(model, test) + rng.choice(resid, size=test.m, replace=True)
    return PredictionEnsemble.from_samples(point, samples, cfg.scale_floor)
