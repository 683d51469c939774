"""Simulation laboratory for coverage studies against a known truth.

A scenario fixes the data-generating model and learner along with the
construction settings, then repeats generate -> bootstrap -> construct -> check for R
replications. Replication r draws everything from
``SeedSequence(master_seed, spawn_key=(r,))``, so the report does not depend
on how replications are scheduled across workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, logit

from .baselines import baseline_sets
from .bootstrap import BootstrapConfig, bootstrap_expected, bootstrap_realized
from .data import TestFeatures, TrainingData
from .excursion import construct, construct_asymptotic, construct_corollary
from .learners import PredictorSpec

GENERATORS = ("linear", "logistic", "cosine")
METHODS = ("cs", "ci", "sci", "asymptotic", "corollary")
OBJECTIVES = ("expected", "realized")
DEFAULT_MODEL = {"linear": "linear", "logistic": "logistic", "cosine": "mlp"}
MAX_FAILURE_RATE = 0.05

COSINE_COEF = (1.0, 6.0, 3.0)
X_RANGE = (-2.0, 2.0)


class ScenarioAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulatedData:
    train: TrainingData
    test: TestFeatures
    truth: np.ndarray  # f at the test points
    realized: np.ndarray | None  # f + fresh noise, continuous generators only
    boundary: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    coef: np.ndarray | None = None  # true coefficients of the linear and logistic models


def linear_mean(X, beta):
    return np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)


def logistic_mean(X, beta):
    return expit(linear_mean(X, beta))


# --- generators --------------------------------------------------------------


def _plant_linear(rng, beta, target, k):
    """k points in the feature cube with x @ beta == target."""
    j = int(np.argmax(np.abs(beta)))
    others = np.arange(beta.size) != j
    out = np.empty((k, beta.size))
    for r in range(k):
        for _ in range(100):
            x = rng.uniform(*X_RANGE, size=beta.size)
            x[j] = (target - x[others] @ beta[others]) / beta[j]
            if X_RANGE[0] <= x[j] <= X_RANGE[1]:
                break
        out[r] = x
    return out


def _append_planted(X_test, truth, planted_X, level):
    boundary = np.arange(X_test.shape[0], X_test.shape[0] + planted_X.shape[0])
    X_test = np.vstack([X_test, planted_X])
    truth = np.concatenate([truth, np.full(planted_X.shape[0], float(level))])
    return X_test, truth, boundary


def gen_linear(n: int, m: int, p: int, sigma: float, seed, planted: int = 0, level: float = 0.0) -> SimulatedData:
    """y = x @ beta + N(0, sigma^2), beta ~ N(0, I), x ~ U(-2, 2)^p.

    ``planted`` extra test points with f(x) = ``level`` exactly are appended
    after the m random ones; their indices are in ``boundary``.
    """
    rng = np.random.default_rng(seed)
    beta = rng.standard_normal(p)
    X = rng.uniform(*X_RANGE, size=(n, p))
    y = linear_mean(X, beta) + sigma * rng.standard_normal(n)
    X_test = rng.uniform(*X_RANGE, size=(m, p))
    truth = linear_mean(X_test, beta)
    boundary = np.empty(0, dtype=np.int64)
    if planted:
        X_test, truth, boundary = _append_planted(X_test, truth, _plant_linear(rng, beta, level, planted), level)
    realized = truth + sigma * rng.standard_normal(truth.size)
    return SimulatedData(TrainingData(X, y), TestFeatures(X_test), truth, realized, boundary, beta)


def gen_logistic(n: int, m: int, p: int, seed, planted: int = 0, level: float = 0.5) -> SimulatedData:
    """y ~ Bernoulli(expit(x @ beta)), beta ~ U(1, 3)^p, x ~ U(-2, 2)^p."""
    rng = np.random.default_rng(seed)
    beta = rng.uniform(1.0, 3.0, size=p)
    X = rng.uniform(*X_RANGE, size=(n, p))
    y = (rng.uniform(size=n) < logistic_mean(X, beta)).astype(float)
    X_test = rng.uniform(*X_RANGE, size=(m, p))
    truth = logistic_mean(X_test, beta)
    boundary = np.empty(0, dtype=np.int64)
    if planted:
        planted_X = _plant_linear(rng, beta, logit(level), planted)
        X_test, truth, boundary = _append_planted(X_test, truth, planted_X, level)
    return SimulatedData(TrainingData(X, y), TestFeatures(X_test), truth, None, boundary, beta)


def cosine_mean(x):
    b0, b1, b2 = COSINE_COEF
    return b0 + b1 * np.cos(b2 * np.asarray(x, dtype=float))


def _plant_cosine(rng, level, k):
    b0, b1, b2 = COSINE_COEF
    v = (level - b0) / b1
    if abs(v) > 1:
        raise ValueError(f"level {level} is outside the range of the cosine model")
    base = np.arccos(v) / b2
    period = 2 * np.pi / b2
    roots = [s * base + j * period for s in (1, -1) for j in range(-3, 4)]
    roots = np.array(sorted({r for r in roots if X_RANGE[0] <= r <= X_RANGE[1]}))
    return rng.choice(roots, size=k)[:, None]


def gen_cosine(n: int, m: int, seed, planted: int = 0, level: float = 0.0) -> SimulatedData:
    """y = 1 + 6 cos(3x) + N(0, 1), x ~ U(-2, 2)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(*X_RANGE, size=(n, 1))
    y = cosine_mean(x[:, 0]) + rng.standard_normal(n)
    X_test = rng.uniform(*X_RANGE, size=(m, 1))
    truth = cosine_mean(X_test[:, 0])
    boundary = np.empty(0, dtype=np.int64)
    if planted:
        X_test, truth, boundary = _append_planted(X_test, truth, _plant_cosine(rng, level, planted), level)
    realized = truth + rng.standard_normal(truth.size)
    return SimulatedData(TrainingData(x, y), TestFeatures(X_test), truth, realized, boundary)


def check_containment(inner, outer, truth_values, c: float) -> bool:
    """True iff inner is a subset of {i : truth_values[i] >= c}, itself a subset of outer."""
    truth_values = np.asarray(truth_values, dtype=float)
    in_truth = truth_values >= c
    in_outer = np.zeros(truth_values.size, dtype=bool)
    in_outer[np.asarray(outer, dtype=np.int64)] = True
    return bool(in_truth[np.asarray(inner, dtype=np.int64)].all() and in_outer[in_truth].all())


# --- scenarios ---------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    generator: str
    n: int
    m: int = 500
    p: int = 3
    sigma: float = 1.0
    c: float = 0.0
    tlb: float = 0.9
    B: int = 200
    replications: int = 200
    objective: str = "expected"
    methods: tuple[str, ...] = ("cs",)
    master_seed: int = 0
    planted: int = 0
    model: str | None = None
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.objective == "realized" and self.generator == "logistic":
            raise ValueError("the realized objective needs a continuous generator")
        for meth in self.methods:
            if meth not in METHODS:
                raise ValueError(f"unknown method {meth!r}")
        if not self.methods:
            raise ValueError("at least one method is required")
        for name in ("n", "m", "p", "B", "replications"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.B < 2:
            raise ValueError("B must be at least 2")
        if not 0 < self.tlb < 1:
            raise ValueError("tlb must be in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if "asymptotic" in self.methods and self.planted < 1:
            raise ValueError("the asymptotic method needs planted boundary points (planted >= 1)")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown scenario fields: {sorted(extra)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["methods"] = list(self.methods)
        return out

    @property
    def learner(self) -> str:
        return self.model or DEFAULT_MODEL[self.generator]


@dataclass(frozen=True)
class MethodOutcome:
    contained: bool
    elb: float = math.nan
    eub: float = math.nan
    boundary_count: float = math.nan
    inner_size: int = 0
    outer_size: int = 0


@dataclass(frozen=True)
class ReplicationOutcome:
    index: int
    outcomes: dict
    truth_set_size: int = 0
    error: str | None = None


def simulate_data(cfg: ScenarioConfig, seed) -> SimulatedData:
    if cfg.generator == "linear":
        return gen_linear(cfg.n, cfg.m, cfg.p, cfg.sigma, seed, cfg.planted, cfg.c)
    if cfg.generator == "logistic":
        return gen_logistic(cfg.n, cfg.m, cfg.p, seed, cfg.planted, cfg.c)
    return gen_cosine(cfg.n, cfg.m, seed, cfg.planted, cfg.c)


def closest_to_boundary(d_true) -> tuple[int, int]:
    """Indices of argmin{d >= 0} d and argmin{d < 0} |d|."""
    d_true = np.asarray(d_true, dtype=float)
    pos = np.flatnonzero(d_true >= 0)
    neg = np.flatnonzero(d_true < 0)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both sides of the level need at least one test point")
    return int(pos[np.argmin(d_true[pos])]), int(neg[np.argmax(d_true[neg])])


def run_replication(cfg: ScenarioConfig, r: int) -> ReplicationOutcome:
    child = np.random.SeedSequence(cfg.master_seed, spawn_key=(r,))
    data_seed, boot_seed = (int(s) for s in child.generate_state(2))
    data = simulate_data(cfg, data_seed)
    spec = PredictorSpec(cfg.learner)
    boot = bootstrap_realized if cfg.objective == "realized" else bootstrap_expected
    ens = boot(spec, data.train, data.test, BootstrapConfig(cfg.B, boot_seed))
    truth = data.realized if cfg.objective == "realized" else data.truth
    outcomes = {}
    for meth in cfg.methods:
        if meth == "cs":
            res = construct(ens, cfg.c, cfg.tlb)
            outcomes[meth] = MethodOutcome(
                check_containment(res.inner, res.outer, truth, cfg.c),
                res.elb, res.eub, res.boundary_count, res.inner.size, res.outer.size,
            )
        elif meth in ("ci", "sci"):
            inner, outer = baseline_sets(ens, 1 - cfg.tlb, cfg.c, meth)
            outcomes[meth] = MethodOutcome(
                check_containment(inner, outer, truth, cfg.c), inner_size=inner.size, outer_size=outer.size
            )
        elif meth == "asymptotic":
            res = construct_asymptotic(ens, cfg.c, cfg.tlb, data.boundary)
            outcomes[meth] = MethodOutcome(
                check_containment(res.inner, res.outer, truth, cfg.c),
                res.elb, res.eub, res.boundary_count, res.inner.size, res.outer.size,
            )
        else:
            d_true = (data.truth - cfg.c) / ens.scale
            plus, minus = closest_to_boundary(d_true)
            res, eub = construct_corollary(ens, cfg.c, plus, minus, d_true)
            outcomes[meth] = MethodOutcome(
                check_containment(res.inner, res.outer, truth, cfg.c),
                eub=eub, boundary_count=2, inner_size=res.inner.size, outer_size=res.outer.size,
            )
    return ReplicationOutcome(r, outcomes, int(np.count_nonzero(truth >= cfg.c)))


def _safe_replication(args) -> ReplicationOutcome:
    cfg, r = args
    try:
        return run_replication(cfg, r)
    except Exception as exc:  # recorded, counted against the failure budget
        return ReplicationOutcome(r, {}, error=f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class MethodSummary:
    coverage: float
    se: float
    mean_elb: float
    mean_eub: float
    mean_boundary_count: float
    mean_inner_size: float
    mean_outer_size: float
    replications: int


def _nanmean(values) -> float:
    arr = np.asarray(values, dtype=float)
    return math.nan if np.isnan(arr).all() else float(np.nanmean(arr))


def summarize(outcomes: list[MethodOutcome]) -> MethodSummary:
    R = len(outcomes)
    cov = float(np.mean([o.contained for o in outcomes]))
    return MethodSummary(
        coverage=cov,
        se=math.sqrt(cov * (1 - cov) / R),
        mean_elb=_nanmean([o.elb for o in outcomes]),
        mean_eub=_nanmean([o.eub for o in outcomes]),
        mean_boundary_count=_nanmean([o.boundary_count for o in outcomes]),
        mean_inner_size=float(np.mean([o.inner_size for o in outcomes])),
        mean_outer_size=float(np.mean([o.outer_size for o in outcomes])),
        replications=R,
    )


@dataclass(frozen=True)
class CoverageReport:
    config: ScenarioConfig
    methods: dict
    failures: int
    failure_messages: tuple[str, ...] = ()
    replications: tuple[ReplicationOutcome, ...] = ()

    def __getitem__(self, method: str) -> MethodSummary:
        return self.methods[method]

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        return {
            "config": self.config.to_dict(),
            "failures": self.failures,
            "failure_messages": list(self.failure_messages),
            "methods": {k: {f: clean(v) for f, v in asdict(s).items()} for k, s in self.methods.items()},
        }

    def csv_rows(self) -> list[dict]:
        cfg = self.config
        rows = []
        for meth, s in self.methods.items():
            row = {
                "scenario": cfg.name or "",
                "generator": cfg.generator,
                "objective": cfg.objective,
                "n": cfg.n,
                "p": cfg.p,
                "tlb": cfg.tlb,
                "method": meth,
            }
            row.update(asdict(s))
            rows.append(row)
        return rows


def run_scenario(cfg: ScenarioConfig, workers: int = 1, keep_replications: bool = False) -> CoverageReport:
    """Run every replication of ``cfg`` and aggregate per-method coverage.

    Raises :class:`ScenarioAborted` when more than 5% of replications fail.
    """
    jobs = [(cfg, r) for r in range(cfg.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_replication, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_safe_replication(job) for job in jobs]
    failed = [res for res in results if res.error is not None]
    if len(failed) > MAX_FAILURE_RATE * cfg.replications:
        raise ScenarioAborted(
            f"{len(failed)} of {cfg.replications} replications failed; first error: {failed[0].error}"
        )
    ok = [res for res in results if res.error is None]
    if not ok:
        raise ScenarioAborted("no replication succeeded")
    methods = {meth: summarize([res.outcomes[meth] for res in ok]) for meth in cfg.methods}
    return CoverageReport(
        cfg,
        methods,
        len(failed),
        tuple(f"replication {res.index}: {res.error}" for res in failed),
        tuple(results) if keep_replications else (),
    )


def write_report(report: CoverageReport, out_dir, stem: str) -> tuple[Path, Path]:
    """Write ``<stem>.json`` and a flat ``<stem>.csv`` (one row per method)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{stem}.json"
    csv_path = out_dir / f"{stem}.csv"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    rows = report.csv_rows()
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return json_path, csv_path
