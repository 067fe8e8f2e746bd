"""Command-line entry point: ``coxsvrg {simulate,reference,race,plot,assess}``.

Exit status is 0 on success, 1 on a configuration error and 2 when a solver
that had to converge (the reference optimum) did not.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .bench import (
    ConfigError,
    RaceConfig,
    ReferenceNotConverged,
    compute_reference,
    dataset_from_spec,
    emit_plot,
    penalty_from_config,
    read_trace_csv,
    run_race,
)
from .estimators import EstimatorConfig, EstimatorKind, assess_estimator
from .simulate import SimulationConfig, write_simulated
from .survival import build_risk_index, cache_phase_state

log = logging.getLogger("coxsvrg")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2


def read_config(path) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: the config must be a JSON object")
    return doc


def _out_dir(args, default) -> Path:
    out = Path(args.out) if args.out else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    doc = read_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        cfg = SimulationConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad simulation config: {exc}") from None
    path = write_simulated(cfg, _out_dir(args, "."), args.stem)
    print(path)
    return EXIT_OK


def cmd_reference(args) -> int:
    doc = read_config(args.config)
    base = Path(args.config).parent
    data = dataset_from_spec(doc.get("dataset", {}), base)
    idx = build_risk_index(data)
    try:
        pen = penalty_from_config(doc.get("penalty", {}), idx.n_failures)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ref_cfg = doc.get("reference", {})
    budget = args.budget if args.budget is not None else int(ref_cfg.get("max_inner_products", 10**9))
    out = _out_dir(args, doc.get("output_dir", "reference"))
    ref = compute_reference(idx, pen, float(ref_cfg.get("tol", 1e-10)), budget, cache_dir=out)
    print(json.dumps({"f_star": ref.f_star, "residual": ref.residual, "fingerprint": ref.fingerprint,
                      "cached": ref.from_cache}))
    return EXIT_OK


def cmd_race(args) -> int:
    doc = read_config(args.config)
    cfg = RaceConfig.from_dict(doc, base_dir=Path(args.config).parent)
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.budget is not None:
        overrides["budget"] = args.budget
    if args.out:
        overrides["output_dir"] = Path(args.out)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    paths = run_race(cfg)
    for p in paths:
        print(p)
    return EXIT_OK


def _trace_files(items: List[str]) -> List[Path]:
    files = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(p.rglob("*.csv")))
        elif p.exists():
            files.append(p)
        else:
            raise ConfigError(f"no such trace file or directory: {p}")
    return files


def cmd_plot(args) -> int:
    files = _trace_files(args.traces)
    if not files:
        raise ConfigError("no trace files to plot")
    try:
        tables = [read_trace_csv(f) for f in files]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out) if args.out else Path("convergence.svg")
    if out.suffix.lower() != ".svg":
        out = out / "convergence.svg"
    print(emit_plot(tables, out, overlay_seeds=args.overlay, title=args.title or ""))
    return EXIT_OK


def _resolve_vector(spec, d: int, rng, what: str) -> np.ndarray:
    if isinstance(spec, list):
        if len(spec) != d:
            raise ConfigError(f"{what} must have length {d}")
        return np.asarray(spec, dtype=np.float64)
    if spec == "zero":
        return np.zeros(d)
    if isinstance(spec, dict) and "random" in spec:
        return float(spec["random"]) * rng.standard_normal(d)
    raise ConfigError(f"{what} must be a list, 'zero' or {{'random': scale}}")


def cmd_assess(args) -> int:
    doc = read_config(args.config)
    base = Path(args.config).parent
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    rng = np.random.default_rng(seed)
    idx = build_risk_index(dataset_from_spec(doc.get("dataset", {}), base))
    d = idx.data.n_features
    theta = _resolve_vector(doc.get("theta", "zero"), d, rng, "theta")
    anchor_spec = doc.get("anchor", "theta")
    anchor = theta if anchor_spec == "theta" else _resolve_vector(anchor_spec, d, rng, "anchor")
    rank = doc.get("failure_rank", "last")
    if rank == "last":
        rank = idx.n_failures - 1
    elif rank == "first":
        rank = 0
    elif not isinstance(rank, int) or not 0 <= rank < idx.n_failures:
        raise ConfigError(f"failure_rank must be 'first', 'last' or an integer in [0, {idx.n_failures})")
    replicates = int(doc.get("replicates", 10_000))
    try:
        kinds = [EstimatorKind(k) for k in doc.get("estimators", ["IMH_UNIFORM", "IMH_ADAPTIVE", "NIS"])]
        iterations = [int(n) for n in doc.get("iterations", [10, 100])]
        cfgs = [EstimatorConfig(k, n) for k in kinds for n in iterations]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if replicates < 100:
        raise ConfigError("replicates must be at least 100")
    cache = cache_phase_state(idx, anchor)
    out = _out_dir(args, doc.get("output_dir", "."))
    path = out / "assess.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "iterations", "replicates", "failure_rank", "risk_size",
                    "mean_bias_norm", "mean_squared_error"])
        for cfg in cfgs:
            rep = assess_estimator(idx, cache, rank, theta, cfg, replicates, rng)
            w.writerow([cfg.kind.value, cfg.iterations, replicates, rank, int(idx.risk_sizes[rank]),
                        repr(rep.mean_bias_norm), repr(rep.mean_squared_error)])
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (plot: SVG path or directory)")
    common.add_argument("--seed", type=int, help="override the configured seed(s)")
    common.add_argument("--budget", type=int, help="override the inner-product budget")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="coxsvrg", description="Doubly stochastic proximal SVRG for the Cox model.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="write a simulated dataset (CSV + .meta.json)")
    s.add_argument("--stem", default="simulated")
    s.set_defaults(func=cmd_simulate)
    sub.add_parser("reference", parents=[common], help="compute and cache the reference optimum"
                   ).set_defaults(func=cmd_reference)
    sub.add_parser("race", parents=[common], help="run a solver race").set_defaults(func=cmd_race)
    s = sub.add_parser("plot", parents=[common], help="plot trace CSVs to an SVG")
    s.add_argument("traces", nargs="+", help="trace CSV files or directories holding them")
    s.add_argument("--overlay", action="store_true", help="draw individual seeds at 30%% opacity")
    s.add_argument("--title")
    s.set_defaults(func=cmd_plot)
    sub.add_parser("assess", parents=[common], help="estimator bias/variance report (CSV)"
                   ).set_defaults(func=cmd_assess)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReferenceNotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
