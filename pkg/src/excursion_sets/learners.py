"""Built-in prediction models behind one fit/predict interface.

Least squares, IRLS logistic regression and the MLP all go through
``fit(spec, data, rng_seed)`` and ``predict(model, X)``.
:func:`fit_many` fits several datasets at once; for the MLP it trains the
networks in lockstep on stacked arrays, which is what makes bootstrapping a
neural network affordable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .data import DataError, DimensionMismatchError, TestFeatures, TrainingData

KINDS = ("linear", "logistic", "mlp")

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
IRLS_JITTER = 1e-8
SEPARATION_NORM = 1e6

_PROB_LO = np.finfo(float).tiny
_PROB_HI = np.nextafter(1.0, 0.0)
# MLP training runs in single precision; parameters are returned as float64
_DT = np.float32
# networks trained together are capped so one chunk's activations stay in cache
_CHUNK_ELEMENTS = 1 << 18


class SeparationWarning(UserWarning):
    """Logistic fit hit (quasi-)complete separation; coefficients are not an MLE."""


@dataclass(frozen=True)
class MLPConfig:
    hidden_layers: int = 2
    hidden_width: int = 40
    learning_rate: float = 0.01
    patience_epochs: int = 100
    validation_fraction: float = 0.2
    max_epochs: int = 5000

    def __post_init__(self):
        for name in ("hidden_layers", "hidden_width", "learning_rate", "patience_epochs", "max_epochs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"MLPConfig.{name} must be positive")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("MLPConfig.validation_fraction must be in (0, 1)")


@dataclass(frozen=True)
class PredictorSpec:
    kind: str
    mlp_config: MLPConfig | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "mlp" and self.mlp_config is None:
            object.__setattr__(self, "mlp_config", MLPConfig())
        if self.kind != "mlp" and self.mlp_config is not None:
            raise ValueError("mlp_config is only valid for kind='mlp'")


@dataclass(frozen=True)
class FittedPredictor:
    kind: str
    params: dict
    p: int
    flags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def separated(self) -> bool:
        return "separation" in self.flags


def _with_intercept(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


# --- linear ------------------------------------------------------------------


def _fit_linear(data: TrainingData) -> FittedPredictor:
    if data.n <= data.p:
        raise DataError(f"linear model needs n > p, got n={data.n}, p={data.p}")
    # lstsq is SVD based and returns the minimum-norm solution when rank deficient
    coef, *_ = np.linalg.lstsq(_with_intercept(data.features), data.outcomes, rcond=None)
    return FittedPredictor("linear", {"coef": coef}, data.p)


# --- logistic ----------------------------------------------------------------


def _fit_logistic(data: TrainingData) -> FittedPredictor:
    y = data.outcomes
    if not np.all((y == 0) | (y == 1)):
        raise DataError("logistic model needs outcomes in {0, 1}")
    X = _with_intercept(data.features)
    beta = np.zeros(X.shape[1])
    flags = ()
    for _ in range(IRLS_MAX_ITER):
        prob = expit(X @ beta)
        grad = X.T @ (y - prob)
        if np.max(np.abs(grad)) < IRLS_TOL:
            break
        w = prob * (1.0 - prob)
        hess = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(hess + IRLS_JITTER * np.eye(len(beta)), grad)
        proposal = beta + step
        if not np.all(np.isfinite(proposal)) or np.linalg.norm(proposal) > SEPARATION_NORM:
            flags = ("separation",)
            break
        beta = proposal
    if not flags:
        # Converging onto fitted probabilities equal to the labels means the
        # likelihood has no maximiser; the coefficients only drifted until
        # the gradient underflowed.
        prob = expit(X @ beta)
        if np.max(np.abs(y - prob)) < 1e-6:
            flags = ("separation",)
    if flags:
        warnings.warn("logistic fit is (quasi-)separated; returning last bounded iterate", SeparationWarning, stacklevel=3)
    return FittedPredictor("logistic", {"coef": beta}, data.p, flags)


# --- MLP ---------------------------------------------------------------------


def _split(n: int, frac: float, rng: np.random.Generator):
    n_val = min(n - 1, max(1, int(round(frac * n))))
    perm = rng.permutation(n)
    return perm[n_val:], perm[:n_val]


def _init_layers(sizes, rng: np.random.Generator):
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        layers.append((W, np.zeros(fan_out)))
    return layers


def _forward(weights, biases, X):
    a = X
    last = len(weights) - 1
    for l, (W, b) in enumerate(zip(weights, biases)):
        a = a @ W
        a += b
        if l < last:
            np.maximum(a, 0.0, out=a)
    return a[..., 0]


def _train_mlp_batch(cfg: MLPConfig, datasets: Sequence[TrainingData], rngs):
    """Full-batch gradient descent on K same-sized datasets in lockstep.

    Training is done in float32, which roughly halves the cost of an epoch.

    Network k only ever sees its own slice of the stacked arrays, so its
    result does not depend on the other members of the batch. A network is
    frozen once its validation loss has not improved for
    ``cfg.patience_epochs`` epochs and the best-validation parameters are
    returned.
    """
    K = len(datasets)
    p = datasets[0].p
    sizes = [p] + [cfg.hidden_width] * cfg.hidden_layers + [1]
    L = len(sizes) - 1

    Xtr, ytr, Xva, yva, inits = [], [], [], [], []
    for data, rng in zip(datasets, rngs):
        tr, va = _split(data.n, cfg.validation_fraction, rng)
        Xtr.append(data.features[tr])
        ytr.append(data.outcomes[tr])
        Xva.append(data.features[va])
        yva.append(data.outcomes[va])
        inits.append(_init_layers(sizes, rng))
    Xtr, ytr, Xva, yva = (np.stack(v).astype(_DT) for v in (Xtr, ytr, Xva, yva))
    W = [np.stack([init[l][0] for init in inits]).astype(_DT) for l in range(L)]
    b = [np.stack([init[l][1] for init in inits])[:, None, :].astype(_DT) for l in range(L)]

    best_W = [w.copy() for w in W]
    best_b = [v.copy() for v in b]
    best_loss = np.full(K, np.inf)
    stale = np.zeros(K, dtype=np.int64)
    live = np.arange(K)  # global ids of the networks still training
    n_tr = Xtr.shape[1]
    lr = _DT(cfg.learning_rate)

    for _ in range(cfg.max_epochs):
        # forward on the training rows, keeping activations for backprop
        acts = [Xtr]
        a = Xtr
        for l in range(L):
            a = a @ W[l]
            a += b[l]
            if l < L - 1:
                np.maximum(a, 0.0, out=a)
            acts.append(a)
        delta = a
        delta -= ytr[..., None]
        delta *= _DT(2.0 / n_tr)
        for l in range(L - 1, -1, -1):
            gW = acts[l].transpose(0, 2, 1) @ delta
            gb = delta.sum(axis=1, keepdims=True)
            if l > 0:
                delta = delta @ W[l].transpose(0, 2, 1)
                delta *= acts[l] > 0
            gW *= lr
            gb *= lr
            W[l] -= gW
            b[l] -= gb

        val_loss = np.mean((_forward(W, b, Xva) - yva) ** 2, axis=1)
        improved = val_loss < best_loss[live]  # NaN never improves
        if improved.any():
            ids = live[improved]
            best_loss[ids] = val_loss[improved]
            for l in range(L):
                best_W[l][ids] = W[l][improved]
                best_b[l][ids] = b[l][improved]
        stale[live] = np.where(improved, 0, stale[live] + 1)
        keep = (stale[live] < cfg.patience_epochs) & np.isfinite(val_loss)
        if not keep.all():
            live = live[keep]
            if live.size == 0:
                break
            W = [w[keep] for w in W]
            b = [v[keep] for v in b]
            Xtr, ytr, Xva, yva = Xtr[keep], ytr[keep], Xva[keep], yva[keep]

    return [
        FittedPredictor(
            "mlp",
            {
                "weights": [best_W[l][k].astype(float) for l in range(L)],
                "biases": [best_b[l][k, 0].astype(float) for l in range(L)],
            },
            p,
        )
        for k in range(K)
    ]


# --- public API --------------------------------------------------------------


def fit(spec: PredictorSpec, data: TrainingData, rng_seed=0) -> FittedPredictor:
    """Fit one model. ``rng_seed`` (int or SeedSequence) only matters for the MLP."""
    return fit_many(spec, [data], [rng_seed])[0]


def fit_many(spec: PredictorSpec, datasets: Sequence[TrainingData], seeds) -> list[FittedPredictor]:
    """Fit one model per dataset; ``seeds[k]`` seeds the k-th fit."""
    if len(datasets) != len(seeds):
        raise ValueError("need one seed per dataset")
    if spec.kind == "linear":
        return [_fit_linear(d) for d in datasets]
    if spec.kind == "logistic":
        return [_fit_logistic(d) for d in datasets]
    out: list[FittedPredictor | None] = [None] * len(datasets)
    groups: dict[tuple[int, int], list[int]] = {}
    for k, d in enumerate(datasets):
        groups.setdefault((d.n, d.p), []).append(k)
    cfg = spec.mlp_config
    for (n, _), idx in groups.items():
        step = max(1, _CHUNK_ELEMENTS // (n * cfg.hidden_width))
        for start in range(0, len(idx), step):
            chunk = idx[start : start + step]
            rngs = [np.random.default_rng(seeds[k]) for k in chunk]
            # a diverging network overflows to inf/nan; it is frozen, not an error
            with np.errstate(over="ignore", invalid="ignore"):
                models = _train_mlp_batch(cfg, [datasets[k] for k in chunk], rngs)
            for k, model in zip(chunk, models):
                out[k] = model
    return out


def predict(model: FittedPredictor, X) -> np.ndarray:
    """Predict on a :class:`TestFeatures` or a raw (m, p) array.

    Logistic models return probabilities strictly inside (0, 1).
    """
    X = X.features if isinstance(X, TestFeatures) else np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.p:
        raise DimensionMismatchError(f"model expects {model.p} features, got array of shape {X.shape}")
    if model.kind == "linear":
        return _with_intercept(X) @ model.params["coef"]
    if model.kind == "logistic":
        return np.clip(expit(_with_intercept(X) @ model.params["coef"]), _PROB_LO, _PROB_HI)
    return _forward(model.params["weights"], model.params["biases"], X)
