"""Synthetic Cox-model survival data.

Features are Gaussian with Toeplitz correlation ``rho**|j - j'|``, failure
times follow the Cox model with a Weibull baseline (cumulative baseline
hazard ``t**nu``), and censoring times are exponential with an intensity
calibrated to a target censoring fraction.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .survival import SurvivalDataset, dumps_csv


def default_true_theta(d: int) -> np.ndarray:
    """First ``ceil(d / 10)`` coordinates alternate +1, -1; the rest are zero."""
    theta = np.zeros(d)
    s = math.ceil(d / 10)
    theta[:s] = np.where(np.arange(s) % 2 == 0, 1.0, -1.0)
    return theta


@dataclass(frozen=True)
class SimulationConfig:
    n_obs: int
    d: int
    toeplitz_rho: float = 0.5
    weibull_shape: float = 1.0
    true_theta: Optional[Sequence[float]] = None
    target_censoring: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_obs < 1 or self.d < 1:
            raise ValueError("n_obs and d must be positive")
        if not 0.0 <= self.toeplitz_rho < 1.0:
            raise ValueError("toeplitz_rho must lie in [0, 1)")
        if not self.weibull_shape > 0:
            raise ValueError("weibull_shape must be positive")
        if not 0.0 < self.target_censoring < 1.0:
            raise ValueError("target_censoring must lie strictly between 0 and 1")
        if self.true_theta is not None:
            theta = tuple(float(v) for v in self.true_theta)
            if len(theta) != self.d:
                raise ValueError("true_theta must have length d")
            object.__setattr__(self, "true_theta", theta)

    def theta(self) -> np.ndarray:
        if self.true_theta is None:
            return default_true_theta(self.d)
        return np.array(self.true_theta)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["true_theta"] = list(self.theta())
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown simulation keys: {sorted(unknown)}")
        return cls(**d)


def gen_features(n_obs: int, d: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows with unit variances and correlation ``rho**|j - j'|`` (AR(1) recursion)."""
    eps = rng.standard_normal((n_obs, d))
    X = np.empty_like(eps)
    X[:, 0] = eps[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, d):
        X[:, j] = rho * X[:, j - 1] + c * eps[:, j]
    return X


def gen_failure_times(features: np.ndarray, theta, nu: float, rng: np.random.Generator) -> np.ndarray:
    """``T_i = (E_i / exp(x_i . theta))**(1/nu)`` with ``E_i ~ Exp(1)``."""
    if not nu > 0:
        raise ValueError("Weibull shape must be positive")
    E = rng.standard_exponential(features.shape[0])
    eta = features @ np.asarray(theta, dtype=np.float64)
    return np.exp((np.log(E) - eta) / nu)


def censoring_fraction(failure_times: np.ndarray, intensity: float) -> float:
    """Expected censored fraction ``mean(1 - exp(-c T_i))`` given the failure times."""
    return float(np.mean(-np.expm1(-intensity * failure_times)))


def calibrate_censoring(failure_times: np.ndarray, target: float) -> float:
    """Exponential censoring intensity whose expected censored fraction is ``target``."""
    if not 0.0 < target < 1.0:
        raise ValueError("target censoring fraction must lie strictly between 0 and 1")
    lo, hi = 1e-12, 1.0
    while censoring_fraction(failure_times, hi) < target:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("cannot reach the censoring target")
    return brentq(lambda c: censoring_fraction(failure_times, c) - target, lo, hi, xtol=1e-14, rtol=1e-12)


def censor(failure_times: np.ndarray, intensity: float, rng: np.random.Generator):
    """Censor with ``C_i ~ Exp(intensity)``; returns ``(observed_times, events)``."""
    if not intensity > 0:
        raise ValueError("censoring intensity must be positive")
    T = np.asarray(failure_times, dtype=np.float64)
    C = rng.standard_exponential(T.shape[0]) / intensity
    return np.minimum(T, C), T <= C


def apply_censoring(failure_times: np.ndarray, target_censoring: float, rng: np.random.Generator):
    """Censor at the intensity calibrated to ``target_censoring``."""
    T = np.asarray(failure_times, dtype=np.float64)
    return censor(T, calibrate_censoring(T, target_censoring), rng)


def simulate(cfg: SimulationConfig) -> SurvivalDataset:
    rng = np.random.default_rng(cfg.seed)
    X = gen_features(cfg.n_obs, cfg.d, cfg.toeplitz_rho, rng)
    T = gen_failure_times(X, cfg.theta(), cfg.weibull_shape, rng)
    y, events = apply_censoring(T, cfg.target_censoring, rng)
    return SurvivalDataset(X, y, events)


def write_simulated(cfg: SimulationConfig, out_dir, stem: str = "simulated") -> Path:
    """Simulate and write ``<stem>.csv`` plus ``<stem>.meta.json``; returns the CSV path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = simulate(cfg)
    csv_path = out_dir / f"{stem}.csv"
    csv_path.write_text(dumps_csv(data, [f"x{j}" for j in range(cfg.d)]), encoding="utf-8")
    meta = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "n_patients": data.n_patients,
        "n_failures": data.n_failures,
        "censored_fraction": 1.0 - data.n_failures / data.n_patients,
    }
    (out_dir / f"{stem}.meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return csv_path
