"""Elastic-net regularizer and the composite objective."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .survival import InnerProductLedger, RiskSetIndex, neg_partial_loglik


@dataclass(frozen=True)
class ElasticNetPenalty:
    """``lam * (alpha * ||theta||_1 + (1 - alpha) / 2 * ||theta||_2^2)``."""

    lam: float
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be finite and nonnegative, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def l1(self) -> float:
        return self.lam * self.alpha

    @property
    def l2(self) -> float:
        return self.lam * (1.0 - self.alpha)

    @property
    def strong_convexity(self) -> float:
        """Modulus contributed by the ridge part."""
        return self.l2

    def value(self, theta) -> float:
        return penalty_value(self, theta)

    def prox(self, v, gamma: float) -> np.ndarray:
        return prox_elastic_net(self, v, gamma)


def penalty_value(pen: ElasticNetPenalty, theta) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    return float(pen.l1 * np.abs(theta).sum() + 0.5 * pen.l2 * theta @ theta)


def prox_elastic_net(pen: ElasticNetPenalty, v, gamma: float) -> np.ndarray:
    """Proximal map of ``gamma * h``: soft-threshold then ridge shrink."""
    if not gamma > 0:
        raise ValueError("prox step gamma must be positive")
    v = np.asarray(v, dtype=np.float64)
    shrunk = np.sign(v) * np.maximum(np.abs(v) - gamma * pen.l1, 0.0)
    return shrunk / (1.0 + gamma * pen.l2)


def objective(
    idx: RiskSetIndex,
    pen: ElasticNetPenalty,
    theta,
    ledger: Optional[InnerProductLedger] = None,
) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    return neg_partial_loglik(idx, theta, ledger) + penalty_value(pen, theta)


def fixed_point_residual(pen: ElasticNetPenalty, theta, grad, gamma: float) -> float:
    """``||theta - prox_{gamma h}(theta - gamma * grad)||``; zero exactly at a minimizer."""
    theta = np.asarray(theta, dtype=np.float64)
    return float(np.linalg.norm(theta - prox_elastic_net(pen, theta - gamma * grad, gamma)))
