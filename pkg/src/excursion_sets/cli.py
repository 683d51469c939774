"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 result written but flagged
(for example an unattainable target lower bound), 4 a simulation scenario
aborted. Every output file gets a ``*.manifest.json`` sibling recording the
command, the resolved settings, the seed and the toolkit version.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys
import time
import warnings
from pathlib import Path

from . import __version__
from .baselines import baseline_sets
from .bootstrap import BootstrapConfig, BootstrapError, bootstrap_expected, bootstrap_realized
from .data import DataError, load_prediction_matrix, load_table, write_prediction_matrix
from .excursion import construct
from .learners import KINDS, PredictorSpec, SeparationWarning
from .simlab import ScenarioAborted, ScenarioConfig, run_scenario, write_report

EXIT_OK, EXIT_INPUT, EXIT_FLAGGED, EXIT_ABORT = 0, 2, 3, 4
WORKERS_ENV = "EXCURSION_SETS_WORKERS"


class InputError(Exception):
    """Bad command-line input; the message names the offending flag."""


def _dump(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _write_manifest(path: Path, command: str, config: dict, seed, started: float) -> None:
    _dump(
        {
            "command": command,
            "argv": sys.argv[1:],
            "config": config,
            "seed": seed,
            "version": __version__,
            "duration_seconds": round(time.perf_counter() - started, 3),
        },
        path,
    )


def _resolve_seed(seed):
    return secrets.randbits(63) if seed is None else seed


def _check_level_tlb(args) -> None:
    if not math.isfinite(args.level):
        raise InputError("--level must be a finite number")
    if not 0 < args.tlb < 1:
        raise InputError(f"--tlb must be in (0, 1), got {args.tlb}")


def _load(flag: str, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except DataError as exc:
        raise InputError(f"{flag}: {exc}") from None


def _ensemble(args, seed: int):
    """Fit and bootstrap from --train/--test; shared by construct and baselines."""
    _check_level_tlb(args)
    if args.bootstraps < 2:
        raise InputError(f"--bootstraps must be at least 2, got {args.bootstraps}")
    if args.objective == "realized" and args.model == "logistic":
        raise InputError("--objective realized needs a continuous outcome; --model logistic is binary")
    train = _load("--train", load_table, args.train, outcome_column=args.outcome_col)
    test = _load("--test", load_table, args.test)
    if test.p != train.p:
        raise InputError(f"--test has {test.p} feature columns but --train has {train.p}")
    engine = bootstrap_realized if args.objective == "realized" else bootstrap_expected
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SeparationWarning)
            ens = engine(PredictorSpec(args.model), train, test, BootstrapConfig(args.bootstraps, seed))
    except (DataError, BootstrapError) as exc:
        raise InputError(f"--train: {exc}") from None
    if args.dump_samples:
        out = Path(args.dump_samples)
        out.mkdir(parents=True, exist_ok=True)
        write_prediction_matrix(ens, out / "point.csv", out / "samples.csv")
    return ens


def _model_config(args, seed) -> dict:
    return {
        "train": str(args.train),
        "outcome_col": args.outcome_col,
        "test": str(args.test),
        "model": args.model,
        "level": args.level,
        "tlb": args.tlb,
        "objective": args.objective,
        "bootstraps": args.bootstraps,
        "seed": seed,
        "out": str(args.out),
    }


def cmd_construct(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    ens = _ensemble(args, seed)
    result = construct(ens, args.level, args.tlb)
    out = Path(args.out)
    _dump(result.to_dict(), out)
    _write_manifest(manifest_path(out), "construct", _model_config(args, seed), seed, started)
    return EXIT_FLAGGED if result.flags else EXIT_OK


def cmd_construct_external(args) -> int:
    started = time.perf_counter()
    _check_level_tlb(args)
    try:
        ens = load_prediction_matrix(args.point, args.samples)
    except DataError as exc:
        raise InputError(f"--point/--samples: {exc}") from None
    result = construct(ens, args.level, args.tlb)
    out = Path(args.out)
    _dump(result.to_dict(), out)
    config = {"point": str(args.point), "samples": str(args.samples), "level": args.level, "tlb": args.tlb, "out": str(out)}
    _write_manifest(manifest_path(out), "construct-external", config, None, started)
    return EXIT_FLAGGED if result.flags else EXIT_OK


def cmd_baselines(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    ens = _ensemble(args, seed)
    alpha = 1 - args.tlb
    inner, outer = baseline_sets(ens, alpha, args.level, args.method)
    # same keys as a construct result; the band methods have no threshold or bounds
    report = {
        "inner": [int(i) for i in inner],
        "outer": [int(i) for i in outer],
        "a": None,
        "e": None,
        "elb": None,
        "eub": None,
        "boundary_count": None,
        "flags": [],
        "method": args.method,
        "alpha": alpha,
    }
    out = Path(args.out)
    _dump(report, out)
    config = _model_config(args, seed)
    config["method"] = args.method
    _write_manifest(manifest_path(out), "baselines", config, seed, started)
    return EXIT_OK


def _scenarios(raw, seed_override):
    items = raw["scenarios"] if isinstance(raw, dict) and "scenarios" in raw else [raw]
    if not isinstance(items, list) or not items:
        raise InputError("--config must hold a scenario object or a non-empty 'scenarios' list")
    entropy_seed = None
    out = []
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise InputError(f"--config: scenario {k} is not an object")
        item = dict(item)
        if seed_override is not None:
            item["master_seed"] = seed_override
        elif "master_seed" not in item:
            entropy_seed = _resolve_seed(entropy_seed)
            item["master_seed"] = entropy_seed
        item.setdefault("name", f"scenario_{k}")
        try:
            out.append(ScenarioConfig.from_dict(item))
        except (TypeError, ValueError) as exc:
            raise InputError(f"--config: scenario {k}: {exc}") from None
    names = [cfg.name for cfg in out]
    if len(set(names)) != len(names):
        raise InputError("--config: scenario names must be unique")
    return out


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    workers = args.workers if args.workers is not None else int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise InputError(f"--workers must be positive, got {workers}")
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"--config: no such file: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"--config: invalid JSON: {exc}") from None
    scenarios = _scenarios(raw, args.seed)
    out_dir = Path(args.out_dir)
    aborted = []
    for cfg in scenarios:
        try:
            report = run_scenario(cfg, workers=workers)
        except ScenarioAborted as exc:
            print(f"scenario {cfg.name} aborted: {exc}", file=sys.stderr)
            aborted.append(cfg.name)
            continue
        write_report(report, out_dir, cfg.name)
    config = {"scenarios": [cfg.to_dict() for cfg in scenarios], "workers": workers, "aborted": aborted}
    seeds = sorted({cfg.master_seed for cfg in scenarios})
    _write_manifest(out_dir / "manifest.json", "simulate", config, seeds[0] if len(seeds) == 1 else seeds, started)
    return EXIT_ABORT if aborted else EXIT_OK


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train", required=True, help="training CSV with a header row")
    p.add_argument("--outcome-col", required=True, help="name of the outcome column in --train")
    p.add_argument("--test", required=True, help="test-feature CSV with a header row")
    p.add_argument("--model", choices=KINDS, default="linear")
    p.add_argument("--level", type=float, required=True, help="excursion level c")
    p.add_argument("--tlb", type=float, default=0.9, help="target lower bound on the containment probability")
    p.add_argument("--objective", choices=("expected", "realized"), default="expected")
    p.add_argument("--bootstraps", type=int, default=200, help="number of bootstrap replicates B")
    p.add_argument("--seed", type=int, default=None, help="master seed; drawn from entropy when omitted")
    p.add_argument("--dump-samples", metavar="DIR", help="also write point.csv and samples.csv to DIR")
    p.add_argument("--out", required=True, help="output JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="excursion-sets", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="fit, bootstrap and build inner/outer confidence sets")
    _model_args(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("construct-external", help="build confidence sets from precomputed bootstrap predictions")
    p.add_argument("--point", required=True, help="CSV of m point predictions")
    p.add_argument("--samples", required=True, help="CSV of bootstrap predictions, one replicate per row")
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--tlb", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_construct_external)

    p = sub.add_parser("baselines", help="sets from inverted pointwise or simultaneous intervals")
    _model_args(p)
    p.add_argument("--method", choices=("ci", "sci"), required=True)
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("simulate", help="run coverage simulations from a JSON scenario file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--seed", type=int, default=None, help="override every scenario's master_seed")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
