"""Solvers for the elastic-net penalized Cox partial likelihood.

* :func:`fista` and :func:`prox_gradient` are deterministic full-gradient
  baselines with backtracking.
* :func:`hsvrg` is the hybrid variance-reduced method: its first
  ``switch_phase`` phases take single-failure steps whose gradient is a Monte
  Carlo estimate, the remaining phases take exact mini-batch steps.
  :func:`two_svrg` and :func:`prox_svrg_minibatch` are its two pure forms.

All solvers report work through an :class:`InnerProductLedger` and record a
:class:`ConvergenceTrace`.  Objective values written to the trace are
evaluated off the books.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from .estimators import EstimatorConfig, EstimatorKind, estimate_gradient
from .penalty import ElasticNetPenalty, fixed_point_residual, objective, penalty_value
from .survival import (
    InnerProductLedger,
    RiskSetIndex,
    cache_phase_state,
    minibatch_gradient,
    value_and_gradient,
)


# --------------------------------------------------------------------------
# schedules and theory constants


class ScheduleRule(str, enum.Enum):
    THEORY_STRONG = "THEORY_STRONG"
    THEORY_CONVEX = "THEORY_CONVEX"
    PRACTICAL = "PRACTICAL"


@dataclass(frozen=True)
class ScheduleSpec:
    """Rule giving the number of Monte Carlo iterations ``N_k`` of phase ``k``.

    ``THEORY_STRONG``: ``ceil(k**alpha * rho**-k)``;
    ``THEORY_CONVEX``: ``ceil(k**alpha)``;
    ``PRACTICAL``: ``ceil(n**(k / (K_S + 2)))`` capped at ``n``.
    """

    rule: ScheduleRule
    alpha: Optional[float] = None
    rho: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "rule", ScheduleRule(self.rule))
        if self.rule in (ScheduleRule.THEORY_STRONG, ScheduleRule.THEORY_CONVEX):
            if self.alpha is None or not self.alpha > 1:
                raise ValueError("theory schedules need alpha > 1")
        if self.rule is ScheduleRule.THEORY_STRONG:
            if self.rho is None or not 0 < self.rho < 1:
                raise ValueError("THEORY_STRONG needs rho in (0, 1)")

    @classmethod
    def theory_strong(cls, alpha: float, rho: float) -> "ScheduleSpec":
        return cls(ScheduleRule.THEORY_STRONG, alpha, rho)

    @classmethod
    def theory_convex(cls, alpha: float) -> "ScheduleSpec":
        return cls(ScheduleRule.THEORY_CONVEX, alpha)

    @classmethod
    def practical(cls) -> "ScheduleSpec":
        return cls(ScheduleRule.PRACTICAL)


def _ceil(x: float) -> int:
    # absorb representation error so that e.g. 9 * 8 stays 72
    return max(1, math.ceil(x * (1.0 - 1e-12)))


def schedule_N(spec: ScheduleSpec, k: int, n: int, switch_phase: int) -> int:
    if k < 1:
        raise ValueError("phases are numbered from 1")
    if spec.rule is ScheduleRule.THEORY_STRONG:
        return _ceil(k**spec.alpha * spec.rho ** (-k))
    if spec.rule is ScheduleRule.THEORY_CONVEX:
        return _ceil(k**spec.alpha)
    return min(n, _ceil(n ** (k / (switch_phase + 2))))


@dataclass(frozen=True)
class ConvexityConstants:
    smoothness: float
    strong_convexity: float
    iterate_radius: float = 1.0

    def __post_init__(self):
        if not self.smoothness > 0:
            raise ValueError("smoothness constant must be positive")
        if self.strong_convexity < 0:
            raise ValueError("strong convexity modulus must be nonnegative")
        if not self.iterate_radius > 0:
            raise ValueError("iterate radius must be positive")


def smoothness_constant(idx: RiskSetIndex) -> float:
    """Bound on the smoothness of every term: ``max_j ||x_j||^2``.

    The Hessian of a term is a covariance of risk-set points, whose spectral
    norm is at most the largest squared row norm.
    """
    X = idx.sorted_features[: idx.n_active]
    return float(np.max(np.einsum("ij,ij->i", X, X)))


def convexity_constants(
    idx: RiskSetIndex, pen: ElasticNetPenalty, iterate_radius: float = 1.0
) -> ConvexityConstants:
    return ConvexityConstants(smoothness_constant(idx), pen.strong_convexity, iterate_radius)


def contraction_rho(consts: ConvexityConstants, m: int, gamma: float) -> float:
    """Per-phase contraction factor of the strongly convex convergence bound."""
    L, mu = consts.smoothness, consts.strong_convexity
    if not 0 < gamma < 1.0 / (16.0 * L):
        raise ValueError(f"step size must lie in (0, 1/(16 L)) = (0, {1 / (16 * L):.3g})")
    if not mu > 0:
        raise ValueError("the linear rate needs a positive strong convexity modulus")
    if m < 1:
        raise ValueError("phase length must be positive")
    a = 8.0 * L * gamma
    return 1.0 / (m * gamma * mu * (1.0 - a)) + a * (1.0 + 1.0 / m) / (1.0 - a)


def check_strong_step(consts: ConvexityConstants, m: int, gamma: float) -> float:
    """Return ``rho`` after asserting the step size and ``rho < 1``."""
    rho = contraction_rho(consts, m, gamma)
    if not rho < 1:
        raise ValueError(f"contraction factor rho = {rho:.4g} is not below 1")
    return rho


def check_convex_step(consts: ConvexityConstants, m: int, gamma: float) -> None:
    bound = 1.0 / (8.0 * consts.smoothness * (2 * m + 1))
    if not 0 < gamma < bound:
        raise ValueError(f"step size must lie in (0, 1/(8 L (2m+1))) = (0, {bound:.3g})")


# --------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class Checkpoint:
    inner_products: int
    objective: float
    elapsed_seconds: float
    phase: int


@dataclass
class ConvergenceTrace:
    checkpoints: List[Checkpoint] = field(default_factory=list)

    def record(self, inner_products: int, objective: float, elapsed: float, phase: int) -> None:
        cp = Checkpoint(int(inner_products), float(objective), float(elapsed), int(phase))
        if self.checkpoints and self.checkpoints[-1].inner_products >= cp.inner_products:
            if self.checkpoints[-1].inner_products > cp.inner_products:
                raise ValueError("inner-product counts must not decrease")
            self.checkpoints[-1] = cp
        else:
            self.checkpoints.append(cp)

    def __len__(self) -> int:
        return len(self.checkpoints)

    @property
    def inner_products(self) -> np.ndarray:
        return np.array([c.inner_products for c in self.checkpoints], dtype=np.int64)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([c.objective for c in self.checkpoints])

    @property
    def phases(self) -> np.ndarray:
        return np.array([c.phase for c in self.checkpoints], dtype=np.int64)

    def phase_end_objectives(self) -> np.ndarray:
        """Objective at the last checkpoint of each phase (phase 0 = start)."""
        last = {}
        for c in self.checkpoints:
            last[c.phase] = c.objective
        return np.array([last[p] for p in sorted(last)])

    def first_reaching(self, target: float) -> Optional[int]:
        """Inner-product count at the first checkpoint with objective <= target."""
        for c in self.checkpoints:
            if c.objective <= target:
                return c.inner_products
        return None


class _Clock:
    def __init__(self):
        self.t0 = time.perf_counter()

    def __call__(self) -> float:
        return time.perf_counter() - self.t0


# --------------------------------------------------------------------------
# deterministic baselines


@dataclass
class FistaResult:
    theta: np.ndarray
    trace: ConvergenceTrace
    converged: bool
    residual: float
    step_size: float
    iterations: int

    @property
    def status(self) -> str:
        return "converged" if self.converged else "budget_exhausted"


def _initial_lipschitz(idx, theta, grad, ledger) -> float:
    g_norm = np.linalg.norm(grad)
    delta = 1e-4 * grad / g_norm if g_norm > 0 else np.full_like(theta, 1e-4)
    _, g2 = value_and_gradient(idx, theta + delta, ledger)
    est = np.linalg.norm(g2 - grad) / np.linalg.norm(delta)
    return max(est, 1e-8)


def fista(
    idx: RiskSetIndex,
    pen: ElasticNetPenalty,
    theta0: Optional[np.ndarray] = None,
    tol: float = 1e-8,
    max_inner_products: int = 10**9,
    ledger: Optional[InnerProductLedger] = None,
    accelerated: bool = True,
    checkpoint_every: int = 1,
) -> FistaResult:
    """Accelerated proximal gradient with backtracking.

    The step is halved until the quadratic upper bound holds at the trial
    point; every evaluation made while backtracking is charged.  A trial point
    that would increase the objective is rejected and the momentum restarted,
    so accepted objectives never increase.  Stops once the fixed-point
    residual ``||x - prox_{h/L}(x - grad f(x)/L)||`` is at most ``tol`` or
    the inner-product budget is used up.

    With ``accelerated=False`` this is plain proximal gradient descent.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    ledger = ledger if ledger is not None else InnerProductLedger()
    start = ledger.count
    clock = _Clock()
    x = np.zeros(idx.n_features) if theta0 is None else np.array(theta0, dtype=np.float64)
    fx, gx = value_and_gradient(idx, x, ledger)
    Fx = fx + penalty_value(pen, x)
    trace = ConvergenceTrace()
    trace.record(ledger.count - start, Fx, clock(), 0)
    L = _initial_lipschitz(idx, x, gx, ledger)
    y, fy, gy = x, fx, gx
    t = 1.0
    it = 0
    residual = fixed_point_residual(pen, x, gx, 1.0 / L)
    converged = residual <= tol
    while not converged and ledger.count - start < max_inner_products:
        it += 1
        while True:
            z = pen.prox(y - gy / L, 1.0 / L)
            fz, gz = value_and_gradient(idx, z, ledger)
            diff = z - y
            bound = fy + gy @ diff + 0.5 * L * (diff @ diff)
            if fz <= bound + 1e-13 * max(1.0, abs(bound)):
                break
            L *= 2.0
            if ledger.count - start >= max_inner_products:
                break
        Fz = fz + penalty_value(pen, z)
        # a step taken from x itself descends in exact arithmetic; accept it
        # even when rounding hides the decrease
        if Fz <= Fx or y is x:
            if accelerated:
                t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                beta = (t - 1.0) / t_next
                t = t_next
            else:
                beta = 0.0
            x_prev, x, fx, gx, Fx = x, z, fz, gz, Fz
            if beta > 0:
                y = x + beta * (x - x_prev)
                fy, gy = value_and_gradient(idx, y, ledger)
            else:
                y, fy, gy = x, fx, gx
        else:
            # restart from the current point without momentum
            t = 1.0
            y, fy, gy = x, fx, gx
        residual = fixed_point_residual(pen, x, gx, 1.0 / L)
        converged = residual <= tol
        if converged or it % checkpoint_every == 0:
            trace.record(ledger.count - start, Fx, clock(), it)
    if not converged or trace.checkpoints[-1].phase != it:
        trace.record(ledger.count - start, Fx, clock(), it)
    return FistaResult(x, trace, converged, residual, 1.0 / L, it)


def prox_gradient(idx, pen, theta0=None, tol=1e-8, max_inner_products=10**9, ledger=None, checkpoint_every=1):
    """Non-accelerated proximal gradient descent with the same backtracking."""
    return fista(idx, pen, theta0, tol, max_inner_products, ledger, accelerated=False,
                 checkpoint_every=checkpoint_every)


# --------------------------------------------------------------------------
# variance-reduced solvers


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the variance-reduced solvers.

    ``phase_length`` defaults to the number of failures and ``minibatch_size``
    to a tenth of it.  ``checkpoint_every`` counts inner iterations; phase ends
    are always checkpointed.  ``max_inner_products`` caps the solver's own
    work.
    """

    phases: int
    step_size: float
    phase_length: Optional[int] = None
    switch_phase: int = 5
    minibatch_size: Optional[int] = None
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec.practical)
    estimator: EstimatorKind = EstimatorKind.NIS
    seed: int = 0
    checkpoint_every: Optional[int] = None
    max_inner_products: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "estimator", EstimatorKind(self.estimator))
        if self.phases < 1:
            raise ValueError("at least one phase is required")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if not 0 <= self.switch_phase <= self.phases:
            raise ValueError("switch phase must lie in [0, phases]")
        if self.phase_length is not None and self.phase_length < 1:
            raise ValueError("phase length must be positive")
        if self.minibatch_size is not None and self.minibatch_size < 1:
            raise ValueError("mini-batch size must be positive")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be positive")
        if self.max_inner_products is not None and self.max_inner_products < 1:
            raise ValueError("inner-product budget must be positive")

    def resolved_phase_length(self, n: int) -> int:
        return self.phase_length if self.phase_length is not None else n

    def resolved_minibatch_size(self, n: int) -> int:
        b = self.minibatch_size if self.minibatch_size is not None else max(1, round(0.1 * n))
        if b > n:
            raise ValueError(f"mini-batch size {b} exceeds the number of failures {n}")
        return b


@dataclass
class SolverResult:
    theta: np.ndarray
    trace: ConvergenceTrace
    anchors: List[np.ndarray]  # phase iterates theta_tilde^1 .. theta_tilde^K
    budget_exhausted: bool

    @property
    def status(self) -> str:
        return "budget_exhausted" if self.budget_exhausted else "completed"


InnerCallback = Callable[[int, int, np.ndarray], None]


def hsvrg(
    idx: RiskSetIndex,
    pen: ElasticNetPenalty,
    cfg: SolverConfig,
    theta0: Optional[np.ndarray] = None,
    ledger: Optional[InnerProductLedger] = None,
    callback: Optional[InnerCallback] = None,
) -> SolverResult:
    """Hybrid SVRG.

    Phases ``1 .. switch_phase`` run ``m`` doubly stochastic steps: draw a
    failure rank uniformly, estimate its gradient with ``N_k`` Monte Carlo
    iterations, correct it with the anchor control variate, take a gradient
    step and apply the prox.  Later phases run ``max(1, (m - 1) // n_mb)``
    steps on mini-batches of ``n_mb`` ranks drawn with replacement.  Each
    phase ends by averaging its iterates into the next anchor.

    ``callback(phase, t, theta)`` is called after every inner step.
    """
    ledger = ledger if ledger is not None else InnerProductLedger()
    start = ledger.count
    budget = cfg.max_inner_products
    clock = _Clock()
    rng = np.random.default_rng(cfg.seed)
    n = idx.n_failures
    m = cfg.resolved_phase_length(n)
    gamma = cfg.step_size
    n_mb = cfg.resolved_minibatch_size(n) if cfg.switch_phase < cfg.phases else None
    m_mb = max(1, (m - 1) // n_mb) if n_mb is not None else 0
    every = cfg.checkpoint_every

    def used() -> int:
        return ledger.count - start

    def exhausted() -> bool:
        return budget is not None and used() >= budget

    trace = ConvergenceTrace()
    theta = np.zeros(idx.n_features) if theta0 is None else np.array(theta0, dtype=np.float64)
    trace.record(0, objective(idx, pen, theta), clock(), 0)
    cache = cache_phase_state(idx, theta, ledger)
    anchors: List[np.ndarray] = []
    stopped = False

    for k in range(1, cfg.phases + 1):
        theta = cache.theta_tilde.copy()
        total = np.zeros_like(theta)
        doubly = k <= cfg.switch_phase
        if doubly:
            est = EstimatorConfig(cfg.estimator, schedule_N(cfg.schedule, k, n, cfg.switch_phase))
            steps = m
        else:
            steps = m_mb
        anchor_full = cache.full_gradient
        t = 0
        for t in range(1, steps + 1):
            if doubly:
                i = int(rng.integers(n))
                g = estimate_gradient(idx, cache, i, theta, est, rng, ledger)
                direction = g - cache.subgradients[i] + anchor_full
            else:
                batch = rng.integers(n, size=n_mb)
                g = minibatch_gradient(idx, batch, theta, ledger)
                direction = g - cache.subgradients[batch].mean(axis=0) + anchor_full
            omega = theta - gamma * direction
            theta = pen.prox(omega, gamma)
            total += theta
            if callback is not None:
                callback(k, t, theta)
            if exhausted():
                stopped = True
                break
            if every is not None and t % every == 0 and t < steps:
                trace.record(used(), objective(idx, pen, theta), clock(), k)
        if stopped:
            trace.record(used(), objective(idx, pen, theta), clock(), k)
            break
        theta = total / steps
        anchors.append(theta)
        trace.record(used(), objective(idx, pen, theta), clock(), k)
        if k < cfg.phases:
            cache = cache_phase_state(idx, theta, ledger)
            if exhausted():
                stopped = True
                break
    return SolverResult(theta, trace, anchors, stopped)


def two_svrg(idx, pen, cfg: SolverConfig, theta0=None, ledger=None, callback=None) -> SolverResult:
    """Doubly stochastic proximal SVRG: every phase uses Monte Carlo gradients."""
    return hsvrg(idx, pen, replace(cfg, switch_phase=cfg.phases), theta0, ledger, callback)


def prox_svrg_minibatch(idx, pen, cfg: SolverConfig, theta0=None, ledger=None, callback=None) -> SolverResult:
    """Mini-batch proximal SVRG with exact mini-batch gradients."""
    return hsvrg(idx, pen, replace(cfg, switch_phase=0), theta0, ledger, callback)


def averaged_iterate(anchors: Sequence[np.ndarray], K: Optional[int] = None) -> np.ndarray:
    """Mean of the first ``K`` phase iterates."""
    K = len(anchors) if K is None else K
    if K < 1 or K > len(anchors):
        raise ValueError(f"K must lie in [1, {len(anchors)}]")
    return np.mean(np.asarray(anchors[:K], dtype=np.float64), axis=0)
