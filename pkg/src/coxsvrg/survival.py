"""Survival data, risk sets and the Cox negative partial log-likelihood.

Every quantity here is expressed over *failure ranks* ``k = 0 .. n-1``: the
failures sorted by decreasing observed time.  Risk sets are nested prefixes of
the patients sorted the same way, so the risk set of the failure with rank
``k`` is ``order[:risk_sizes[k]]`` and ``risk_sizes`` is nondecreasing in ``k``.

The cost model counts feature/parameter inner products ``x_j . theta``.  Each
public routine charges an :class:`InnerProductLedger` with exactly the number
of products it computes.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

# Largest spread of exponents for which a single global shift keeps every
# prefix sum of exp(z - max z) a normal float.
_GLOBAL_SHIFT_RANGE = 600.0


class InnerProductLedger:
    """Counter of feature/parameter inner products actually computed."""

    def __init__(self, count: int = 0):
        if count < 0:
            raise ValueError("ledger count must be nonnegative")
        self._count = int(count)

    @property
    def count(self) -> int:
        return self._count

    def charge(self, k: int) -> None:
        if k < 0:
            raise ValueError("cannot charge a negative number of inner products")
        self._count += int(k)

    def __repr__(self) -> str:
        return f"InnerProductLedger(count={self._count})"


def _charge(ledger: Optional[InnerProductLedger], k: int) -> None:
    if ledger is not None:
        ledger.charge(k)


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored survival data.

    Parameters
    ----------
    features : (n_pat, d) array
        Row ``i`` holds the covariates of patient ``i``.
    times : (n_pat,) array
        Observed times, strictly positive.
    events : (n_pat,) bool array
        ``True`` when the observed time is a failure, ``False`` if censored.
    """

    features: np.ndarray
    times: np.ndarray
    events: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        y = np.asarray(self.times, dtype=np.float64).ravel()
        e = np.asarray(self.events).ravel().astype(bool)
        if X.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if not (X.shape[0] == y.shape[0] == e.shape[0]):
            raise ValueError("features, times and events must have the same length")
        if X.shape[0] == 0:
            raise ValueError("dataset is empty")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            raise ValueError("times must be finite and strictly positive")
        if not e.any():
            raise ValueError("dataset has no observed failure")
        for name, arr in (("features", X), ("times", y), ("events", e)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_patients(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_failures(self) -> int:
        return int(self.events.sum())


def load_csv(path) -> SurvivalDataset:
    """Read a dataset with header ``time,event,<feature columns...>``."""
    with open(path, newline="", encoding="utf-8") as fh:
        return _parse_csv(fh)


def loads_csv(text: str) -> SurvivalDataset:
    return _parse_csv(io.StringIO(text, newline=""))


def _parse_csv(fh) -> SurvivalDataset:
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValueError("empty CSV file") from None
    if len(header) < 3 or header[0] != "time" or header[1] != "event":
        raise ValueError("CSV header must start with 'time,event' followed by feature columns")
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("CSV file has no data rows")
    width = len(header)
    for lineno, r in enumerate(rows, start=2):
        if len(r) != width:
            raise ValueError(f"line {lineno}: expected {width} fields, got {len(r)}")
    data = np.array(rows, dtype=np.float64)
    events = data[:, 1]
    if not np.all((events == 0) | (events == 1)):
        raise ValueError("event column must contain only 0 or 1")
    return SurvivalDataset(data[:, 2:], data[:, 0], events.astype(bool))


def save_csv(data: SurvivalDataset, path, feature_names: Optional[Sequence[str]] = None) -> None:
    """Write ``data`` in the CSV format read by :func:`load_csv`.

    Floats are written with ``repr`` so a round trip is exact.
    """
    d = data.n_features
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(d)]
    if len(names) != d:
        raise ValueError("one name per feature column is required")
    Path(path).write_text(dumps_csv(data, names), encoding="utf-8")


def dumps_csv(data: SurvivalDataset, feature_names: Sequence[str]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["time", "event", *feature_names])
    for t, e, x in zip(data.times, data.events, data.features):
        writer.writerow([repr(float(t)), int(e), *(repr(float(v)) for v in x)])
    return out.getvalue()


@dataclass(frozen=True, eq=False)
class RiskSetIndex:
    """Risk-set structure of a :class:`SurvivalDataset`.

    Attributes
    ----------
    order : (n_pat,) int array
        Patients sorted by decreasing time; within a tie, failures come before
        censored patients, then by original index.
    failure_positions : (n,) int array
        Positions in ``order`` of the failures, increasing.
    risk_sizes : (n,) int array
        ``|R_i|`` for each failure rank.  With tied times this is the end of
        the tie block, so tied patients share each other's risk sets.
    """

    data: SurvivalDataset
    order: np.ndarray
    failure_positions: np.ndarray
    risk_sizes: np.ndarray
    sorted_features: np.ndarray = field(repr=False)
    failure_features: np.ndarray = field(repr=False)

    @property
    def n_failures(self) -> int:
        return self.failure_positions.shape[0]

    @property
    def n_active(self) -> int:
        """Length of the prefix of ``order`` touched by any risk set."""
        return int(self.risk_sizes[-1])

    @property
    def n_features(self) -> int:
        return self.sorted_features.shape[1]

    @property
    def failure_patients(self) -> np.ndarray:
        """Original patient index of each failure rank."""
        return self.order[self.failure_positions]

    def risk_set(self, k: int) -> np.ndarray:
        """Original patient indices in the risk set of failure rank ``k``."""
        return self.order[: self.risk_sizes[k]]


def build_risk_index(data: SurvivalDataset) -> RiskSetIndex:
    y, e = data.times, data.events
    if not e.any():
        raise ValueError("dataset has no observed failure")
    n_pat = y.shape[0]
    # lexsort: last key is primary
    order = np.lexsort((np.arange(n_pat), ~e, -y))
    ys = y[order]
    failure_positions = np.flatnonzero(e[order])
    # end of the tie block containing each position
    block_end = np.searchsorted(-ys, -ys, side="right")
    risk_sizes = block_end[failure_positions]
    Xs = np.ascontiguousarray(data.features[order])
    for arr in (order, failure_positions, risk_sizes, Xs):
        arr.setflags(write=False)
    xf = np.ascontiguousarray(Xs[failure_positions])
    xf.setflags(write=False)
    return RiskSetIndex(data, order, failure_positions, risk_sizes, Xs, xf)


def _check_rank(idx: RiskSetIndex, k: int) -> int:
    k = int(k)
    if not 0 <= k < idx.n_failures:
        raise IndexError(f"failure rank {k} out of range [0, {idx.n_failures})")
    return k


def _softmax(z: np.ndarray) -> np.ndarray:
    w = np.exp(z - z.max())
    return w / w.sum()


def softmax_weights(
    idx: RiskSetIndex,
    k: int,
    theta: np.ndarray,
    ledger: Optional[InnerProductLedger] = None,
    products: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Weights ``pi_theta^k(j)`` over the risk set of failure rank ``k``.

    The result is aligned with ``idx.risk_set(k)``.  ``products`` may supply
    the precomputed ``x_j . theta`` for (at least) the risk-set prefix, in
    which case nothing is charged.
    """
    k = _check_rank(idx, k)
    r = idx.risk_sizes[k]
    if products is None:
        z = idx.sorted_features[:r] @ theta
        _charge(ledger, r)
    else:
        z = np.asarray(products, dtype=np.float64)[:r]
    return _softmax(z)


def subfunction_gradient(
    idx: RiskSetIndex, k: int, theta: np.ndarray, ledger: Optional[InnerProductLedger] = None
) -> np.ndarray:
    """Exact gradient of the term of failure rank ``k``; costs ``|R_k|``."""
    k = _check_rank(idx, k)
    r = idx.risk_sizes[k]
    w = softmax_weights(idx, k, theta, ledger)
    return w @ idx.sorted_features[:r] - idx.failure_features[k]


def subfunction_value(
    idx: RiskSetIndex, k: int, theta: np.ndarray, ledger: Optional[InnerProductLedger] = None
) -> float:
    k = _check_rank(idx, k)
    r = idx.risk_sizes[k]
    z = idx.sorted_features[:r] @ theta
    _charge(ledger, r)
    c = z.max()
    return float(-z[idx.failure_positions[k]] + c + np.log(np.exp(z - c).sum()))


@dataclass(frozen=True)
class _Sweep:
    means: np.ndarray  # (n, d) E_pi[x] over each risk set
    log_norms: np.ndarray  # (n,) log sum_{j in R} exp(z_j)


def _prefix_sweep(Xs: np.ndarray, z: np.ndarray, ends: np.ndarray) -> _Sweep:
    """Softmax means and log-normalizers over the prefixes ``[:end]``.

    ``ends`` must be nondecreasing and bounded by ``len(z)``.
    """
    cmax = np.maximum.accumulate(z)
    c = cmax[-1]
    if c - cmax[ends[0] - 1] < _GLOBAL_SHIFT_RANGE:
        w = np.exp(z - c)
        s2 = np.cumsum(w)
        s1 = np.cumsum(w[:, None] * Xs, axis=0)
        rows = ends - 1
        return _Sweep(s1[rows] / s2[rows, None], np.log(s2[rows]) + c)
    return _running_max_sweep(Xs, z, ends)


def _running_max_sweep(Xs: np.ndarray, z: np.ndarray, ends: np.ndarray) -> _Sweep:
    n, d = ends.shape[0], Xs.shape[1]
    means = np.empty((n, d))
    log_norms = np.empty(n)
    m = -np.inf
    s1 = np.zeros(d)
    s2 = 0.0
    k = 0
    for p in range(ends[-1]):
        zp = z[p]
        if zp > m:
            scale = np.exp(m - zp)
            s1 *= scale
            s2 *= scale
            m = zp
        w = np.exp(zp - m)
        s1 += w * Xs[p]
        s2 += w
        while k < n and ends[k] == p + 1:
            means[k] = s1 / s2
            log_norms[k] = m + np.log(s2)
            k += 1
    return _Sweep(means, log_norms)


def neg_partial_loglik(
    idx: RiskSetIndex, theta: np.ndarray, ledger: Optional[InnerProductLedger] = None
) -> float:
    """Cox negative partial log-likelihood averaged over failures.

    Uses a single prefix sweep; charges ``idx.n_active`` inner products.
    """
    value, _ = value_and_gradient(idx, theta, ledger)
    return value


def full_gradient(
    idx: RiskSetIndex, theta: np.ndarray, ledger: Optional[InnerProductLedger] = None
) -> np.ndarray:
    """Gradient of :func:`neg_partial_loglik`; charges ``idx.n_active``."""
    _, grad = value_and_gradient(idx, theta, ledger)
    return grad


def value_and_gradient(
    idx: RiskSetIndex, theta: np.ndarray, ledger: Optional[InnerProductLedger] = None
) -> tuple[float, np.ndarray]:
    """Value and gradient from one sweep sharing the same ``n_active`` products."""
    r = idx.n_active
    z = idx.sorted_features[:r] @ theta
    _charge(ledger, r)
    sw = _prefix_sweep(idx.sorted_features[:r], z, idx.risk_sizes)
    value = float(np.mean(sw.log_norms - z[idx.failure_positions]))
    grad = np.mean(sw.means, axis=0) - np.mean(idx.failure_features, axis=0)
    return value, grad


def minibatch_gradient(
    idx: RiskSetIndex,
    batch: Sequence[int],
    theta: np.ndarray,
    ledger: Optional[InnerProductLedger] = None,
) -> np.ndarray:
    """Average of exact subfunction gradients over ``batch`` (a multiset of ranks).

    Only the prefix up to the largest risk set in the batch is swept, so the
    cost is ``max_{k in batch} |R_k|`` inner products.
    """
    b = np.asarray(batch, dtype=np.intp).ravel()
    if b.size == 0:
        raise ValueError("mini-batch must be nonempty")
    if b.min() < 0 or b.max() >= idx.n_failures:
        raise IndexError("mini-batch contains an invalid failure rank")
    kmax = int(b.max())
    r = int(idx.risk_sizes[kmax])
    z = idx.sorted_features[:r] @ theta
    _charge(ledger, r)
    sw = _prefix_sweep(idx.sorted_features[:r], z, idx.risk_sizes[: kmax + 1])
    return np.mean(sw.means[b] - idx.failure_features[b], axis=0)


@dataclass(frozen=True, eq=False)
class PhaseCache:
    """Everything computed once per phase at the anchor ``theta_tilde``.

    ``log_weights`` are ``x_j . theta_tilde - shift`` and ``cum_weights`` the
    running sums of ``exp(log_weights)`` over the active prefix of ``order``,
    so the anchor softmax of failure rank ``k`` is sampled by a binary search
    in ``cum_weights[:risk_sizes[k]]``.
    """

    theta_tilde: np.ndarray
    products: np.ndarray
    shift: float
    log_weights: np.ndarray
    cum_weights: np.ndarray
    value: float
    full_gradient: np.ndarray
    subgradients: np.ndarray  # (n, d) exact gradient of each term at the anchor

    def sample_anchor(self, risk_size: int, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw positions in ``[0, risk_size)`` from the anchor softmax."""
        total = self.cum_weights[risk_size - 1]
        u = rng.random(size)
        if total > 1e-280:
            pos = np.searchsorted(self.cum_weights[:risk_size], u * total, side="right")
            return np.minimum(pos, risk_size - 1)
        # whole prefix underflowed under the global shift: rebuild it locally
        lw = self.log_weights[:risk_size]
        cw = np.cumsum(np.exp(lw - lw.max()))
        pos = np.searchsorted(cw, u * cw[-1], side="right")
        return np.minimum(pos, risk_size - 1)

    def anchor_weights(self, risk_size: int) -> np.ndarray:
        """Exact anchor softmax over a risk-set prefix (no inner products)."""
        return _softmax(self.log_weights[:risk_size])


def cache_phase_state(
    idx: RiskSetIndex, theta_tilde: np.ndarray, ledger: Optional[InnerProductLedger] = None
) -> PhaseCache:
    """Anchor pass: ``idx.n_active`` inner products, shared by all cached quantities."""
    theta_tilde = np.array(theta_tilde, dtype=np.float64)
    r = idx.n_active
    z = idx.sorted_features[:r] @ theta_tilde
    _charge(ledger, r)
    sw = _prefix_sweep(idx.sorted_features[:r], z, idx.risk_sizes)
    sub = sw.means - idx.failure_features
    c = float(z.max())
    lw = z - c
    cache = PhaseCache(
        theta_tilde=theta_tilde,
        products=z,
        shift=c,
        log_weights=lw,
        cum_weights=np.cumsum(np.exp(lw)),
        value=float(np.mean(sw.log_norms - z[idx.failure_positions])),
        full_gradient=sub.mean(axis=0),
        subgradients=sub,
    )
    for arr in (theta_tilde, z, lw, cache.cum_weights, cache.full_gradient, sub):
        arr.setflags(write=False)
    return cache
