"""Monte Carlo estimators of a single Cox subfunction gradient.

The gradient of the term of failure rank ``k`` is ``-x_k + E_pi[x_j]`` with
``pi`` the softmax of ``x_j . theta`` over the risk set.  The estimators below
replace the expectation by an average over ``N`` draws:

* independent Metropolis-Hastings with a uniform proposal on the risk set,
* independent Metropolis-Hastings whose proposal is the softmax at the phase
  anchor ``theta_tilde`` (sampled from the :class:`PhaseCache`, no products),
* self-normalized importance sampling with that same anchor proposal.

Each fresh ``x_j . theta`` costs one inner product.  IMH computes one per
proposal, and the initial state is itself a proposal draw, so a chain of
``N`` steps charges ``N + 1``.  NIS charges ``N``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .survival import (
    InnerProductLedger,
    PhaseCache,
    RiskSetIndex,
    _charge,
    _check_rank,
    _softmax,
    subfunction_gradient,
)


class EstimatorKind(str, enum.Enum):
    IMH_UNIFORM = "IMH_UNIFORM"
    IMH_ADAPTIVE = "IMH_ADAPTIVE"
    NIS = "NIS"
    # exact subfunction gradient; costs |R_k| products, used as a reference
    EXACT = "EXACT"

    @property
    def is_imh(self) -> bool:
        return self in (EstimatorKind.IMH_UNIFORM, EstimatorKind.IMH_ADAPTIVE)


@dataclass(frozen=True)
class EstimatorConfig:
    kind: EstimatorKind
    iterations: int

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind(self.kind))
        if int(self.iterations) < 1:
            raise ValueError("the estimator needs at least one iteration")
        object.__setattr__(self, "iterations", int(self.iterations))

    def inner_products(self, risk_size: int) -> int:
        """Inner products charged by one estimate."""
        if self.kind.is_imh:
            return self.iterations + 1
        if self.kind is EstimatorKind.NIS:
            return self.iterations
        return int(risk_size)


@dataclass(frozen=True)
class BiasVarianceReport:
    """Replicate statistics of ``estimate - exact gradient``."""

    mean_bias_norm: float
    mean_squared_error: float
    replicates: int
    iterations: int
    mean_error: np.ndarray
    std_error: np.ndarray  # standard error of each coordinate of mean_error


@numba.njit(cache=True)
def _imh_states(scores, log_u, proposals):
    """Run independent MH chains.

    ``scores[r, l]`` is ``log pi - log Q`` (up to a constant) of proposal
    ``proposals[r, l]``; column 0 is the initial state.  Returns the visited
    states ``j_1 .. j_N`` of each chain.
    """
    n_chains, n_prop = scores.shape
    states = np.empty((n_chains, n_prop - 1), dtype=np.int64)
    for r in range(n_chains):
        cur = proposals[r, 0]
        cur_score = scores[r, 0]
        for l in range(n_prop - 1):
            s = scores[r, l + 1]
            if log_u[r, l] < s - cur_score:
                cur = proposals[r, l + 1]
                cur_score = s
            states[r, l] = cur
    return states


def _draw(kind: EstimatorKind, cache: PhaseCache, risk_size: int, size, rng: np.random.Generator):
    if kind is EstimatorKind.IMH_UNIFORM:
        return rng.integers(risk_size, size=size)
    n = int(np.prod(size))
    return cache.sample_anchor(risk_size, n, rng).reshape(size)


def imh_estimate(
    idx: RiskSetIndex,
    cache: PhaseCache,
    k: int,
    theta: np.ndarray,
    cfg: EstimatorConfig,
    rng: np.random.Generator,
    ledger: Optional[InnerProductLedger] = None,
) -> np.ndarray:
    """Independent Metropolis-Hastings estimate of the gradient of term ``k``.

    The chain starts from a proposal draw and all ``N`` visited states are
    averaged (no burn-in).
    """
    if not cfg.kind.is_imh:
        raise ValueError(f"{cfg.kind} is not an IMH estimator")
    states = imh_chain(idx, cache, k, theta, cfg.kind, cfg.iterations, rng, ledger)
    return idx.sorted_features[states].mean(axis=0) - idx.failure_features[k]


def imh_chain(
    idx: RiskSetIndex,
    cache: PhaseCache,
    k: int,
    theta: np.ndarray,
    kind: EstimatorKind,
    n_steps: int,
    rng: np.random.Generator,
    ledger: Optional[InnerProductLedger] = None,
) -> np.ndarray:
    """Visited states (positions in the risk-set prefix) of one IMH chain.

    Same transition rule and cost as :func:`imh_estimate`: ``n_steps + 1``
    inner products.
    """
    kind = EstimatorKind(kind)
    if not kind.is_imh:
        raise ValueError(f"{kind} is not an IMH estimator")
    k = _check_rank(idx, k)
    r = int(idx.risk_sizes[k])
    props = _draw(kind, cache, r, n_steps + 1, rng)
    log_u = np.log(rng.random(n_steps))
    z = idx.sorted_features[props] @ theta
    _charge(ledger, n_steps + 1)
    scores = z if kind is EstimatorKind.IMH_UNIFORM else z - cache.products[props]
    return _imh_states(scores[None, :], log_u[None, :], props[None, :])[0]


def nis_estimate(
    idx: RiskSetIndex,
    cache: PhaseCache,
    k: int,
    theta: np.ndarray,
    cfg: EstimatorConfig,
    rng: np.random.Generator,
    ledger: Optional[InnerProductLedger] = None,
) -> np.ndarray:
    """Self-normalized importance sampling with the anchor softmax as proposal."""
    if cfg.kind is not EstimatorKind.NIS:
        raise ValueError(f"{cfg.kind} is not the NIS estimator")
    k = _check_rank(idx, k)
    r = int(idx.risk_sizes[k])
    n = cfg.iterations
    draws = cache.sample_anchor(r, n, rng)
    rows = idx.sorted_features[draws]
    a = rows @ theta - cache.products[draws]
    _charge(ledger, n)
    w = np.exp(a - a.max())
    return (w @ rows) / w.sum() - idx.failure_features[k]


def estimate_gradient(
    idx: RiskSetIndex,
    cache: PhaseCache,
    k: int,
    theta: np.ndarray,
    cfg: EstimatorConfig,
    rng: np.random.Generator,
    ledger: Optional[InnerProductLedger] = None,
) -> np.ndarray:
    """Dispatch on ``cfg.kind``."""
    if cfg.kind.is_imh:
        return imh_estimate(idx, cache, k, theta, cfg, rng, ledger)
    if cfg.kind is EstimatorKind.NIS:
        return nis_estimate(idx, cache, k, theta, cfg, rng, ledger)
    return subfunction_gradient(idx, k, theta, ledger)


def _batch_estimates(idx, cache, k, theta, cfg, n_rep, rng):
    """``n_rep`` independent estimates at once, with the risk-set products precomputed."""
    r = int(idx.risk_sizes[k])
    n = cfg.iterations
    Xr = idx.sorted_features[:r]
    z = Xr @ theta
    if cfg.kind.is_imh:
        props = _draw(cfg.kind, cache, r, (n_rep, n + 1), rng)
        log_u = np.log(rng.random((n_rep, n)))
        member_scores = z if cfg.kind is EstimatorKind.IMH_UNIFORM else z - cache.products[:r]
        states = _imh_states(member_scores[props], log_u, props)
        offsets = (np.arange(n_rep) * r)[:, None]
        counts = np.bincount((states + offsets).ravel(), minlength=n_rep * r).reshape(n_rep, r)
        means = (counts @ Xr) / n
    else:
        draws = _draw(cfg.kind, cache, r, (n_rep, n), rng)
        a = (z - cache.products[:r])[draws]
        w = np.exp(a - a.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        weight_on = np.zeros((n_rep, r))
        np.add.at(weight_on, (np.repeat(np.arange(n_rep), n), draws.ravel()), w.ravel())
        means = weight_on @ Xr
    return means - idx.failure_features[k]


def assess_estimator(
    idx: RiskSetIndex,
    cache: PhaseCache,
    k: int,
    theta: np.ndarray,
    cfg: EstimatorConfig,
    replicates: int,
    rng: np.random.Generator,
    chunk: int = 20_000,
) -> BiasVarianceReport:
    """Empirical bias norm and mean squared error of an estimator.

    Diagnostic only: inner products are not charged to any ledger.
    """
    if replicates < 100:
        raise ValueError("use at least 100 replicates")
    k = _check_rank(idx, k)
    r = int(idx.risk_sizes[k])
    exact = _softmax(idx.sorted_features[:r] @ theta) @ idx.sorted_features[:r] - idx.failure_features[k]
    if cfg.kind is EstimatorKind.EXACT:
        d = exact.shape[0]
        return BiasVarianceReport(0.0, 0.0, replicates, cfg.iterations, np.zeros(d), np.zeros(d))
    total = np.zeros_like(exact)
    total_sq = np.zeros_like(exact)
    done = 0
    while done < replicates:
        b = min(chunk, replicates - done)
        err = _batch_estimates(idx, cache, k, theta, cfg, b, rng) - exact
        total += err.sum(axis=0)
        total_sq += (err**2).sum(axis=0)
        done += b
    mean = total / replicates
    second = total_sq / replicates
    var = np.maximum(second - mean**2, 0.0) * replicates / (replicates - 1)
    return BiasVarianceReport(
        mean_bias_norm=float(np.linalg.norm(mean)),
        mean_squared_error=float(second.sum()),
        replicates=replicates,
        iterations=cfg.iterations,
        mean_error=mean,
        std_error=np.sqrt(var / replicates),
    )
