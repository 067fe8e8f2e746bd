"""Benchmark harness: reference optimum, solver races, trace files and plots.

A race runs every configured solver for every seed under the same
inner-product budget and checkpoint cadence, and writes one CSV trace per
(solver, seed) pair::

    solver,seed,inner_products,objective,gap,seconds,phase

where ``gap`` is the objective minus the cached reference optimum.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .estimators import EstimatorKind
from .penalty import ElasticNetPenalty, fixed_point_residual, objective
from .simulate import SimulationConfig, simulate
from .solvers import (
    ConvergenceTrace,
    ScheduleSpec,
    SolverConfig,
    fista,
    hsvrg,
    prox_gradient,
)
from .survival import (
    InnerProductLedger,
    RiskSetIndex,
    SurvivalDataset,
    build_risk_index,
    full_gradient,
    load_csv,
)

log = logging.getLogger(__name__)

DEFAULT_STEP_GRID = (1e-2, 1e-3, 1e-4)
TRACE_COLUMNS = ("solver", "seed", "inner_products", "objective", "gap", "seconds", "phase")


class ConfigError(ValueError):
    """Invalid race, simulation or assessment configuration."""


class ReferenceNotConverged(RuntimeError):
    """The reference solver used up its budget before reaching the tolerance."""


# --------------------------------------------------------------------------
# penalties


PRESETS = {
    "HIGH_RIDGE": (0.0, "sqrt"),
    "LOW_RIDGE": (0.0, "linear"),
    "HIGH_LASSO": (1.0, "sqrt"),
    "LOW_LASSO": (1.0, "linear"),
}


def preset_penalty(name: str, n_failures: int) -> ElasticNetPenalty:
    """Penalty of a named regime; ``lambda`` uses the number of failures."""
    try:
        alpha, scale = PRESETS[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown penalty preset {name!r}; choose from {sorted(PRESETS)}") from None
    lam = 1.0 / math.sqrt(n_failures) if scale == "sqrt" else 1.0 / n_failures
    return ElasticNetPenalty(lam, alpha)


def penalty_from_config(spec: dict, n_failures: int) -> ElasticNetPenalty:
    if "preset" in spec:
        return preset_penalty(spec["preset"], n_failures)
    try:
        return ElasticNetPenalty(float(spec["lambda"]), float(spec["alpha"]))
    except KeyError as exc:
        raise ConfigError(f"penalty needs a 'preset' or 'lambda' and 'alpha' (missing {exc})") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# reference optimum


def fingerprint(data: SurvivalDataset, pen: ElasticNetPenalty) -> str:
    h = hashlib.sha256()
    for arr in (data.features, data.times, data.events.astype(np.uint8)):
        h.update(np.ascontiguousarray(arr).tobytes())
        h.update(str(arr.shape).encode())
    h.update(f"{pen.lam!r},{pen.alpha!r}".encode())
    return h.hexdigest()


@dataclass
class ReferenceOptimum:
    theta_star: np.ndarray
    f_star: float
    residual: float
    step_size: float
    tolerance: float
    fingerprint: str
    from_cache: bool = False

    def to_dict(self) -> dict:
        return {
            "theta_star": [float(v) for v in self.theta_star],
            "f_star": self.f_star,
            "residual": self.residual,
            "step_size": self.step_size,
            "tolerance": self.tolerance,
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict, from_cache: bool = False) -> "ReferenceOptimum":
        return cls(
            np.array(d["theta_star"], dtype=np.float64),
            float(d["f_star"]),
            float(d["residual"]),
            float(d["step_size"]),
            float(d["tolerance"]),
            d["fingerprint"],
            from_cache,
        )


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def compute_reference(
    idx: RiskSetIndex,
    pen: ElasticNetPenalty,
    tol: float = 1e-10,
    max_inner_products: int = 10**9,
    cache_dir=None,
    ledger: Optional[InnerProductLedger] = None,
) -> ReferenceOptimum:
    """Minimize the objective with FISTA to a fixed-point residual ``<= tol``.

    With ``cache_dir`` the result is stored under the dataset/penalty
    fingerprint and reused on later calls.  Raises
    :class:`ReferenceNotConverged` (and caches nothing) when the budget runs
    out first.
    """
    fp = fingerprint(idx.data, pen)
    path = Path(cache_dir) / f"reference-{fp[:20]}.json" if cache_dir is not None else None
    if path is not None and path.exists():
        cached = ReferenceOptimum.from_dict(json.loads(path.read_text(encoding="utf-8")), from_cache=True)
        if cached.fingerprint == fp and cached.tolerance <= tol:
            return cached
    res = fista(idx, pen, tol=tol, max_inner_products=max_inner_products, ledger=ledger,
                checkpoint_every=10**9)
    if not res.converged:
        raise ReferenceNotConverged(
            f"reference solver stopped with residual {res.residual:.3g} > {tol:.3g} "
            f"after {res.trace.inner_products[-1]} inner products"
        )
    ref = ReferenceOptimum(
        theta_star=res.theta,
        f_star=objective(idx, pen, res.theta),
        residual=res.residual,
        step_size=res.step_size,
        tolerance=tol,
        fingerprint=fp,
    )
    if path is not None:
        _atomic_write(path, json.dumps(ref.to_dict(), indent=1) + "\n")
    return ref


def reference_residual(idx: RiskSetIndex, pen: ElasticNetPenalty, ref: ReferenceOptimum) -> float:
    g = full_gradient(idx, ref.theta_star)
    return fixed_point_residual(pen, ref.theta_star, g, ref.step_size)


# --------------------------------------------------------------------------
# race configuration


ALGORITHMS = ("hsvrg", "2svrg", "svrg_mb", "fista", "prox_grad")


@dataclass
class SolverEntry:
    name: str
    algorithm: str
    step_size: object = "auto"  # float, or "auto" to pick from the step grid
    phases: Optional[int] = None
    phase_length: Optional[int] = None
    switch_phase: int = 5
    minibatch_size: Optional[int] = None
    minibatch_fraction: Optional[float] = None
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec.practical)
    estimator: EstimatorKind = EstimatorKind.NIS

    @classmethod
    def from_dict(cls, d: dict) -> "SolverEntry":
        d = dict(d)
        try:
            name = d.pop("name")
            algorithm = d.pop("algorithm")
        except KeyError as exc:
            raise ConfigError(f"solver entry missing {exc}") from None
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
        kw = {}
        if "schedule" in d:
            s = dict(d.pop("schedule"))
            try:
                kw["schedule"] = ScheduleSpec(s.pop("rule"), **s)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"solver {name!r}: bad schedule: {exc}") from None
        if "estimator" in d:
            try:
                kw["estimator"] = EstimatorKind(d.pop("estimator"))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        allowed = {"step_size", "phases", "phase_length", "switch_phase", "minibatch_size", "minibatch_fraction"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"solver {name!r}: unknown keys {sorted(unknown)}")
        kw.update(d)
        entry = cls(name=name, algorithm=algorithm, **kw)
        if algorithm == "2svrg" and entry.phases is None:
            # its schedule depends on the total number of phases
            raise ConfigError(f"solver {name!r}: 2svrg needs an explicit 'phases'")
        if not (entry.step_size == "auto" or isinstance(entry.step_size, (int, float)) and entry.step_size > 0):
            raise ConfigError(f"solver {name!r}: step_size must be positive or 'auto'")
        return entry

    def solver_config(self, n: int, step: float, seed: int, budget: int, checkpoint_every: Optional[int]) -> SolverConfig:
        switch = {"hsvrg": self.switch_phase, "2svrg": None, "svrg_mb": 0}[self.algorithm]
        phases = self.phases if self.phases is not None else 10**9
        if switch is None:
            switch = phases
        mb = self.minibatch_size
        if mb is None and self.minibatch_fraction is not None:
            mb = max(1, round(self.minibatch_fraction * n))
        return SolverConfig(
            phases=phases,
            step_size=step,
            phase_length=self.phase_length,
            switch_phase=min(switch, phases),
            minibatch_size=mb,
            schedule=self.schedule,
            estimator=self.estimator,
            seed=seed,
            checkpoint_every=checkpoint_every,
            max_inner_products=budget,
        )


@dataclass
class RaceConfig:
    solvers: List[SolverEntry]
    budget: int
    seeds: List[int]
    output_dir: Path
    penalty: dict
    dataset_path: Optional[Path] = None
    simulation: Optional[SimulationConfig] = None
    checkpoint_every: Optional[int] = None
    reference_tol: float = 1e-10
    reference_budget: int = 10**9
    step_grid: Sequence[float] = DEFAULT_STEP_GRID
    pilot_fraction: float = 0.05
    wall_clock: bool = True

    def __post_init__(self):
        if not self.solvers:
            raise ConfigError("a race needs at least one solver")
        if not self.budget > 0:
            raise ConfigError("budget must be positive")
        if not self.seeds:
            raise ConfigError("a race needs at least one seed")
        if (self.dataset_path is None) == (self.simulation is None):
            raise ConfigError("give exactly one of a dataset path or a simulation config")
        names = [s.name for s in self.solvers]
        if len(set(names)) != len(names):
            raise ConfigError("solver names must be unique")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "RaceConfig":
        base = Path(base_dir) if base_dir is not None else Path(".")
        d = dict(d)
        known = {"dataset", "penalty", "solvers", "budget", "seeds", "output_dir", "checkpoint_every",
                 "reference", "step_grid", "pilot_fraction", "wall_clock"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown race keys: {sorted(unknown)}")
        try:
            ds = d["dataset"]
            solvers = [SolverEntry.from_dict(s) for s in d["solvers"]]
            budget = int(d["budget"])
            penalty = d["penalty"]
        except KeyError as exc:
            raise ConfigError(f"race config missing {exc}") from None
        path = sim = None
        if "path" in ds:
            path = Path(ds["path"])
            if not path.is_absolute():
                path = base / path
        elif "simulate" in ds:
            try:
                sim = SimulationConfig.from_dict(ds["simulate"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad simulation config: {exc}") from None
        else:
            raise ConfigError("dataset needs 'path' or 'simulate'")
        ref = d.get("reference", {})
        out = Path(d.get("output_dir", "race_out"))
        if not out.is_absolute():
            out = base / out
        return cls(
            solvers=solvers,
            budget=budget,
            seeds=[int(s) for s in d.get("seeds", [0])],
            output_dir=out,
            penalty=penalty,
            dataset_path=path,
            simulation=sim,
            checkpoint_every=d.get("checkpoint_every"),
            reference_tol=float(ref.get("tol", 1e-10)),
            reference_budget=int(ref.get("max_inner_products", 10**9)),
            step_grid=tuple(float(g) for g in d.get("step_grid", DEFAULT_STEP_GRID)),
            pilot_fraction=float(d.get("pilot_fraction", 0.05)),
            wall_clock=bool(d.get("wall_clock", True)),
        )

    @classmethod
    def load(cls, path) -> "RaceConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)

    def load_dataset(self) -> SurvivalDataset:
        if self.simulation is not None:
            return simulate(self.simulation)
        return _load_dataset_file(self.dataset_path)


def _load_dataset_file(path) -> SurvivalDataset:
    try:
        return load_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load dataset {path}: {exc}") from None


def dataset_from_spec(ds: dict, base_dir=None) -> SurvivalDataset:
    """Dataset from ``{"path": ...}`` (relative to ``base_dir``) or ``{"simulate": {...}}``."""
    if not isinstance(ds, dict):
        raise ConfigError("dataset must be an object")
    if "path" in ds:
        path = Path(ds["path"])
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        return _load_dataset_file(path)
    if "simulate" in ds:
        try:
            return simulate(SimulationConfig.from_dict(ds["simulate"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad simulation config: {exc}") from None
    raise ConfigError("dataset needs 'path' or 'simulate'")


# --------------------------------------------------------------------------
# races


def run_solver(
    entry: SolverEntry,
    idx: RiskSetIndex,
    pen: ElasticNetPenalty,
    step: float,
    seed: int,
    budget: int,
    checkpoint_every: Optional[int],
) -> ConvergenceTrace:
    n = idx.n_failures
    if entry.algorithm in ("fista", "prox_grad"):
        run = fista if entry.algorithm == "fista" else prox_gradient
        # a vanishing tolerance keeps the baselines running until the shared budget is spent
        return run(idx, pen, tol=np.finfo(float).tiny, max_inner_products=budget,
                   checkpoint_every=checkpoint_every or 1).trace
    cfg = entry.solver_config(n, step, seed, budget, checkpoint_every)
    return hsvrg(idx, pen, cfg).trace


def pick_step_size(entry, idx, pen, grid, seed, budget, checkpoint_every) -> float:
    """Best step of ``grid`` by final objective of a short pilot run."""
    best, best_val = None, math.inf
    for g in grid:
        try:
            tr = run_solver(entry, idx, pen, g, seed, budget, checkpoint_every)
        except (FloatingPointError, ValueError):
            continue
        val = tr.checkpoints[-1].objective
        if np.isfinite(val) and val < best_val:
            best, best_val = g, val
    if best is None:
        raise ConfigError(f"solver {entry.name!r}: no step size in {list(grid)} produced a finite objective")
    return best


def trace_rows(solver: str, seed: int, trace: ConvergenceTrace, f_star: float, wall_clock: bool = True):
    for c in trace.checkpoints:
        yield (solver, seed, c.inner_products, c.objective, c.objective - f_star,
               c.elapsed_seconds if wall_clock else 0.0, c.phase)


def write_trace_csv(path, rows: Iterable[tuple]) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for solver, seed, ip, obj, gap, sec, phase in rows:
        lines.append(f"{solver},{seed},{ip},{obj!r},{gap!r},{sec:.6f},{phase}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")


@dataclass
class TraceTable:
    solver: str
    seed: int
    inner_products: np.ndarray
    objective: np.ndarray
    gap: np.ndarray
    seconds: np.ndarray
    phase: np.ndarray


def read_trace_csv(path) -> TraceTable:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != ",".join(TRACE_COLUMNS):
        raise ValueError(f"{path}: not a trace file")
    rows = [line.split(",") for line in text[1:] if line.strip()]
    if not rows:
        raise ValueError(f"{path}: trace has no checkpoints")
    solvers = {r[0] for r in rows}
    seeds = {r[1] for r in rows}
    if len(solvers) != 1 or len(seeds) != 1:
        raise ValueError(f"{path}: a trace file holds a single (solver, seed) pair")
    col = lambda i, t: np.array([t(r[i]) for r in rows])  # noqa: E731
    return TraceTable(rows[0][0], int(rows[0][1]), col(2, int), col(3, float), col(4, float),
                      col(5, float), col(6, int))


def run_race(cfg: RaceConfig) -> List[Path]:
    """Run every (solver, seed) pair and write traces plus ``status.json``.

    A failing solver is recorded in the status file and the race goes on.
    """
    data = cfg.load_dataset()
    idx = build_risk_index(data)
    try:
        pen = penalty_from_config(cfg.penalty, idx.n_failures)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(cfg.output_dir)
    trace_dir = out / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    ref = compute_reference(idx, pen, cfg.reference_tol, cfg.reference_budget, cache_dir=out / "reference")
    status: Dict[str, dict] = {
        "reference": {"f_star": ref.f_star, "residual": ref.residual, "fingerprint": ref.fingerprint},
        "penalty": {"lambda": pen.lam, "alpha": pen.alpha},
        "n_failures": idx.n_failures,
        "n_patients": data.n_patients,
        "budget": cfg.budget,
        "runs": {},
    }
    written = []
    for entry in cfg.solvers:
        step = entry.step_size
        if step == "auto" and entry.algorithm not in ("fista", "prox_grad"):
            pilot = max(1, int(cfg.pilot_fraction * cfg.budget))
            step = pick_step_size(entry, idx, pen, cfg.step_grid, cfg.seeds[0], pilot, cfg.checkpoint_every)
            log.info("solver %s: picked step size %g", entry.name, step)
        for seed in cfg.seeds:
            key = f"{entry.name}__seed{seed}"
            try:
                trace = run_solver(entry, idx, pen, step, seed, cfg.budget, cfg.checkpoint_every)
            except Exception as exc:  # one failing solver must not stop the race
                status["runs"][key] = {"status": "failed", "error": repr(exc),
                                       "traceback": traceback.format_exc()}
                log.error("run %s failed: %s", key, exc)
                continue
            path = trace_dir / f"{key}.csv"
            write_trace_csv(path, trace_rows(entry.name, seed, trace, ref.f_star, cfg.wall_clock))
            last = trace.checkpoints[-1]
            status["runs"][key] = {
                "status": "ok",
                "step_size": step if step != "auto" else None,
                "final_inner_products": last.inner_products,
                "final_gap": last.objective - ref.f_star,
                "trace": str(path.relative_to(out)),
            }
            written.append(path)
    _atomic_write(out / "status.json", json.dumps(status, indent=2, sort_keys=True) + "\n")
    return written


# --------------------------------------------------------------------------
# plots


GAP_FLOOR = 1e-12
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _log_gap(gap: np.ndarray) -> np.ndarray:
    return np.log10(np.maximum(np.asarray(gap, dtype=np.float64), GAP_FLOOR))


def median_curve(tables: Sequence[TraceTable]):
    """Median over seeds of the step-interpolated log-gap, on the union of checkpoints."""
    if len(tables) == 1:
        t = tables[0]
        return t.inner_products.astype(float), _log_gap(t.gap)
    xs = np.unique(np.concatenate([t.inner_products for t in tables])).astype(float)
    vals = np.full((len(tables), xs.size), np.nan)
    for r, t in enumerate(tables):
        pos = np.searchsorted(t.inner_products, xs, side="right") - 1
        ok = pos >= 0
        vals[r, ok] = _log_gap(t.gap)[pos[ok]]
    return xs, np.nanmedian(vals, axis=0)


def _nice_step(span: float) -> float:
    raw = span / 5.0
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if m * mag >= raw:
            return m * mag
    return 10 * mag


def emit_plot(tables: Sequence[TraceTable], path, overlay_seeds: bool = False, title: str = "") -> Path:
    """Write a self-contained SVG of log10 gap against inner products.

    One polyline per solver (median over seeds); with ``overlay_seeds`` the
    individual seeds of multi-seed solvers are drawn underneath at 30% opacity.
    """
    if not tables:
        raise ValueError("nothing to plot: no traces given")
    groups: Dict[str, List[TraceTable]] = {}
    for t in tables:
        groups.setdefault(t.solver, []).append(t)
    curves = {name: median_curve(ts) for name, ts in groups.items()}

    all_y = np.concatenate([_log_gap(t.gap) for t in tables])
    y_lo, y_hi = math.floor(all_y.min()), math.ceil(all_y.max())
    if y_hi == y_lo:
        y_hi += 1
    x_hi = max(float(t.inner_products.max()) for t in tables)
    x_hi = x_hi if x_hi > 0 else 1.0

    W, H = 800, 500
    left, right, top, bottom = 80, 180, 40, 60
    pw, ph = W - left - right, H - top - bottom

    def sx(x):
        return left + pw * (x / x_hi)

    def sy(y):
        return top + ph * (y_hi - y) / (y_hi - y_lo)

    def points(x, y):
        return " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))

    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<g font-family="sans-serif" font-size="12" fill="black">',
    ]
    if title:
        parts.append(f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    parts.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for v in range(y_lo, y_hi + 1):
        y = sy(v)
        parts.append(f'<line class="ytick" x1="{left - 5}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" '
                     f'stroke="#dddddd"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{v}</text>')
    step = _nice_step(x_hi)
    v = 0.0
    while v <= x_hi * (1 + 1e-9):
        x = sx(v)
        parts.append(f'<line class="xtick" x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{top + ph + 20}" text-anchor="middle">{v:g}</text>')
        v += step
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{H - 15}" text-anchor="middle">inner products</text>')
    parts.append(f'<text x="20" y="{top + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 20 {top + ph / 2:.1f})">log10(objective - optimum)</text>')
    parts.append("</g>")

    for c, (name, ts) in enumerate(groups.items()):
        color = _COLORS[c % len(_COLORS)]
        if overlay_seeds and len(ts) > 1:
            for t in ts:
                parts.append(f'<polyline class="seed" fill="none" stroke="{color}" stroke-opacity="0.3" '
                             f'stroke-width="1" points="{points(t.inner_products, _log_gap(t.gap))}"/>')
        x, y = curves[name]
        parts.append(f'<polyline class="median" fill="none" stroke="{color}" stroke-width="2" '
                     f'points="{points(x, y)}"><title>{escape(name)}</title></polyline>')
        ly = top + 15 + 20 * c
        lx = left + pw + 15
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly + 4}" font-family="sans-serif" font-size="12">'
                     f'{escape(name)} (n={len(ts)})</text>')
    parts.append("</svg>")
    path = Path(path)
    _atomic_write(path, "\n".join(parts) + "\n")
    return path
