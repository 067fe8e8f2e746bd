import math

import numpy as np
import pytest

from coxsvrg import (
    ConvexityConstants,
    ElasticNetPenalty,
    InnerProductLedger,
    ScheduleSpec,
    SimulationConfig,
    SolverConfig,
    SurvivalDataset,
    averaged_iterate,
    build_risk_index,
    cache_phase_state,
    contraction_rho,
    fista,
    full_gradient,
    hsvrg,
    minibatch_gradient,
    objective,
    prox_gradient,
    prox_svrg_minibatch,
    schedule_N,
    simulate,
    two_svrg,
)
from coxsvrg.penalty import fixed_point_residual
from coxsvrg.solvers import (
    ConvergenceTrace,
    check_convex_step,
    check_strong_step,
    convexity_constants,
    smoothness_constant,
)

from conftest import naive_gradient, random_dataset


def _trace_key(trace):
    return [(c.inner_products, c.objective, c.phase) for c in trace.checkpoints]


@pytest.fixture(scope="module")
def desk():
    idx = build_risk_index(simulate(SimulationConfig(n_obs=500, d=20, seed=0)))
    pen = ElasticNetPenalty(1 / math.sqrt(idx.n_failures), 0.0)
    return idx, pen


@pytest.fixture
def toy():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((20, 3))
    idx = build_risk_index(SurvivalDataset(X, np.arange(20, 0, -1.0), rng.random(20) < 0.8))
    return idx, ElasticNetPenalty(0.05, 0.5)


# ---------------------------------------------------------------- schedules


def test_schedule_examples():
    assert schedule_N(ScheduleSpec.theory_strong(2, 0.5), 3, 10, 5) == 72
    assert schedule_N(ScheduleSpec.theory_convex(2), 5, 10, 5) == 25
    assert schedule_N(ScheduleSpec.practical(), 7, 1000, 5) == 1000
    assert schedule_N(ScheduleSpec.practical(), 9, 1000, 5) == 1000  # cap
    assert schedule_N(ScheduleSpec.practical(), 1, 1000, 5) == math.ceil(1000 ** (1 / 7))


@pytest.mark.parametrize("make", [
    lambda: ScheduleSpec.theory_strong(1.0, 0.5),
    lambda: ScheduleSpec.theory_strong(2.0, 1.0),
    lambda: ScheduleSpec.theory_strong(2.0, 0.0),
    lambda: ScheduleSpec.theory_convex(0.5),
    lambda: ScheduleSpec("NOPE"),
])
def test_invalid_schedules(make):
    with pytest.raises(ValueError):
        make()


def test_schedule_rejects_phase_zero():
    with pytest.raises(ValueError):
        schedule_N(ScheduleSpec.practical(), 0, 10, 5)


# ---------------------------------------------------------------- theory constants


def test_contraction_rho_example():
    c = ConvexityConstants(1.0, 1.0)
    assert contraction_rho(c, 100, 1 / 32) == pytest.approx(128 / 300 + 1.01 / 3, rel=1e-12)


def test_contraction_rho_limits():
    c = ConvexityConstants(1.0, 1.0)
    a = 8 / 64
    assert contraction_rho(c, 10**12, 1 / 64) == pytest.approx(a / (1 - a), rel=1e-9)
    assert contraction_rho(c, 100, 1e-9) > 1e6


def test_step_guards():
    c = ConvexityConstants(2.0, 0.1)
    with pytest.raises(ValueError):
        contraction_rho(c, 10, 1 / 32)  # not below 1/(16 L)
    with pytest.raises(ValueError):
        contraction_rho(ConvexityConstants(1.0, 0.0), 10, 0.01)
    with pytest.raises(ValueError):
        check_strong_step(c, 10, 1e-3)  # rho > 1 for such a short phase
    check_convex_step(c, 10, 0.99 / (16 * 21))
    with pytest.raises(ValueError):
        check_convex_step(c, 10, 1.01 / (16 * 21))


def test_smoothness_bounds_the_hessian():
    rng = np.random.default_rng(0)
    idx = build_risk_index(random_dataset(rng, n_pat=30, d=4))
    L = smoothness_constant(idx)
    for _ in range(5):
        a, b = rng.standard_normal((2, 4))
        ga, gb = full_gradient(idx, a), full_gradient(idx, b)
        assert np.linalg.norm(ga - gb) <= L * np.linalg.norm(a - b) + 1e-12
    consts = convexity_constants(idx, ElasticNetPenalty(0.3, 0.25))
    assert consts.strong_convexity == pytest.approx(0.3 * 0.75)


# ---------------------------------------------------------------- traces and config


def test_trace_rules():
    tr = ConvergenceTrace()
    tr.record(0, 3.0, 0.0, 0)
    tr.record(5, 2.0, 0.1, 1)
    tr.record(5, 1.5, 0.2, 1)  # same count replaces
    assert len(tr) == 2 and tr.objectives.tolist() == [3.0, 1.5]
    with pytest.raises(ValueError):
        tr.record(4, 1.0, 0.3, 1)
    assert tr.first_reaching(1.6) == 5 and tr.first_reaching(1.0) is None


@pytest.mark.parametrize("kw", [
    dict(phases=0, step_size=0.1),
    dict(phases=2, step_size=0.0),
    dict(phases=2, step_size=0.1, switch_phase=3),
    dict(phases=2, step_size=0.1, phase_length=0),
    dict(phases=2, step_size=0.1, estimator="NOPE"),
])
def test_solver_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_minibatch_larger_than_n_rejected(toy):
    idx, pen = toy
    with pytest.raises(ValueError):
        hsvrg(idx, pen, SolverConfig(phases=2, step_size=0.1, switch_phase=0, minibatch_size=idx.n_failures + 1))


def test_averaged_iterate():
    a = [np.array([1.0, 2.0]), np.array([3.0, 0.0]), np.array([5.0, 1.0])]
    np.testing.assert_array_equal(averaged_iterate(a, 1), a[0])
    np.testing.assert_allclose(averaged_iterate(a, 3), [3.0, 1.0])
    np.testing.assert_array_equal(averaged_iterate([a[1]] * 4, 4), a[1])
    with pytest.raises(ValueError):
        averaged_iterate(a, 4)


# ---------------------------------------------------------------- FISTA


def test_fista_monotone_and_fixed_point(desk):
    idx, _ = desk
    pen = ElasticNetPenalty(1 / math.sqrt(idx.n_failures), 0.0)
    res = fista(idx, pen, tol=1e-9)
    assert res.converged and res.status == "converged"
    F = res.trace.objectives
    # near the optimum a plain step may move F by a rounding unit either way
    assert np.all(np.diff(F) <= 4 * np.finfo(float).eps * np.abs(F[1:]))
    g = full_gradient(idx, res.theta)
    assert fixed_point_residual(pen, res.theta, g, res.step_size) <= 10 * 1e-9


def test_fista_matches_tight_reference(desk):
    idx, pen = desk
    ref = fista(idx, pen, tol=1e-12)
    slow = prox_gradient(idx, pen, tol=1e-11)
    f_ref = objective(idx, pen, ref.theta)
    assert abs(objective(idx, pen, slow.theta) - f_ref) < 1e-10
    res = fista(idx, pen, tol=1e-8)
    assert objective(idx, pen, res.theta) - f_ref < 1e-8


def test_fista_lasso_sparsity_and_budget(desk):
    idx, _ = desk
    pen = ElasticNetPenalty(0.1, 1.0)
    res = fista(idx, pen, tol=1e-10)
    assert res.converged
    assert np.sum(res.theta != 0) < idx.n_features
    led = InnerProductLedger()
    short = fista(idx, pen, tol=1e-14, max_inner_products=5000, ledger=led)
    assert not short.converged and short.status == "budget_exhausted"
    assert short.trace.inner_products[-1] == led.count
    assert 5000 <= led.count <= 5000 + 4 * idx.n_active


def test_fista_ledger_matches_trace(toy):
    idx, pen = toy
    led = InnerProductLedger(100)
    res = fista(idx, pen, tol=1e-10, ledger=led)
    assert res.trace.inner_products[-1] == led.count - 100
    assert np.all(np.diff(res.trace.inner_products) > 0)


# ---------------------------------------------------------------- variance-reduced solvers


def test_minibatch_direction_unbiased(toy):
    idx, _ = toy
    rng = np.random.default_rng(0)
    cache = cache_phase_state(idx, rng.standard_normal(3))
    theta = cache.theta_tilde + 0.3 * rng.standard_normal(3)
    n, b = idx.n_failures, 3
    dirs = np.array([
        minibatch_gradient(idx, B, theta) - cache.subgradients[B].mean(axis=0) + cache.full_gradient
        for B in (rng.integers(n, size=b) for _ in range(10_000))
    ])
    se = dirs.std(axis=0, ddof=1) / math.sqrt(len(dirs))
    assert np.all(np.abs(dirs.mean(axis=0) - full_gradient(idx, theta)) <= 3 * se)


def test_full_batch_direction_is_the_gradient(toy):
    idx, _ = toy
    rng = np.random.default_rng(1)
    cache = cache_phase_state(idx, rng.standard_normal(3))
    theta = rng.standard_normal(3)
    D = np.arange(idx.n_failures)
    d = minibatch_gradient(idx, D, theta) - cache.subgradients[D].mean(axis=0) + cache.full_gradient
    np.testing.assert_allclose(d, full_gradient(idx, theta), atol=1e-12)


def test_svrg_mb_phase_gaps_decrease(desk):
    idx, pen = desk
    f_star = objective(idx, pen, fista(idx, pen, tol=1e-11).theta)
    for gamma in (1e-2, 1e-3):
        res = prox_svrg_minibatch(idx, pen, SolverConfig(phases=10, step_size=gamma, switch_phase=0, seed=3))
        gaps = res.trace.phase_end_objectives() - f_star
        assert np.sum(np.diff(gaps) > 0) <= 1
        assert gaps[-1] < gaps[0]


@pytest.mark.parametrize("estimator", ["NIS", "IMH_ADAPTIVE"])
def test_degenerate_switch_phases(toy, estimator):
    idx, pen = toy
    base = dict(phases=4, step_size=0.05, checkpoint_every=3, seed=7, estimator=estimator)
    a = hsvrg(idx, pen, SolverConfig(switch_phase=0, **base))
    b = prox_svrg_minibatch(idx, pen, SolverConfig(switch_phase=0, **base))
    assert _trace_key(a.trace) == _trace_key(b.trace)
    c = hsvrg(idx, pen, SolverConfig(switch_phase=4, **base))
    d = two_svrg(idx, pen, SolverConfig(switch_phase=2, **base))  # two_svrg forces K_S = K
    assert _trace_key(c.trace) == _trace_key(d.trace)


def test_hsvrg_trace_is_continuous_and_deterministic(toy):
    idx, pen = toy
    cfg = SolverConfig(phases=6, step_size=0.05, switch_phase=3, checkpoint_every=4, seed=11)
    a, b = hsvrg(idx, pen, cfg), hsvrg(idx, pen, cfg)
    assert _trace_key(a.trace) == _trace_key(b.trace)
    assert a.theta.tobytes() == b.theta.tobytes()
    assert np.all(np.diff(a.trace.inner_products) > 0)
    assert a.trace.phases.tolist() == sorted(a.trace.phases.tolist())
    assert set(a.trace.phases.tolist()) == set(range(7))
    assert len(a.anchors) == 6


@pytest.mark.parametrize("estimator, per_draw", [("NIS", 0), ("IMH_UNIFORM", 1), ("IMH_ADAPTIVE", 1)])
def test_ledger_completeness_two_svrg(toy, estimator, per_draw):
    idx, pen = toy
    K, m = 3, 7
    cfg = SolverConfig(phases=K, step_size=0.05, phase_length=m, switch_phase=K,
                       schedule=ScheduleSpec.theory_convex(2.0), estimator=estimator)
    led = InnerProductLedger()
    res = two_svrg(idx, pen, cfg, ledger=led)
    expected = K * idx.n_active + sum(m * (k * k + per_draw) for k in range(1, K + 1))
    assert led.count == expected
    # the final phase does not refresh the anchor, so the trace ends at the ledger total
    assert res.trace.inner_products[-1] == expected


def test_ledger_completeness_minibatch(toy):
    idx, pen = toy
    n = idx.n_failures
    cfg = SolverConfig(phases=3, step_size=0.05, switch_phase=0, minibatch_size=4, seed=5)
    led = InnerProductLedger()
    prox_svrg_minibatch(idx, pen, cfg, ledger=led)
    rng = np.random.default_rng(5)
    steps = max(1, (n - 1) // 4)
    work = sum(int(idx.risk_sizes[rng.integers(n, size=4).max()]) for _ in range(3 * steps))
    assert led.count == 3 * idx.n_active + work


def test_budget_stops_the_solver(toy):
    idx, pen = toy
    led = InnerProductLedger()
    cfg = SolverConfig(phases=1000, step_size=0.05, switch_phase=1000, max_inner_products=3000, seed=1)
    res = hsvrg(idx, pen, cfg, ledger=led)
    assert res.budget_exhausted and res.status == "budget_exhausted"
    assert 3000 <= res.trace.inner_products[-1] <= 3000 + idx.n_active + idx.n_failures


def test_prox_step_ordering_without_penalty(toy):
    # lambda = 0: prox is the identity, so each step is exactly theta - gamma * d
    idx, _ = toy
    pen = ElasticNetPenalty(0.0, 0.0)
    gamma, m = 0.1, 5
    seen = []
    two_svrg(idx, pen, SolverConfig(phases=1, step_size=gamma, phase_length=m, switch_phase=1,
                                    estimator="EXACT", seed=4),
             callback=lambda k, t, th: seen.append(th.copy()))
    rng = np.random.default_rng(4)
    theta_tilde = np.zeros(3)
    cache = cache_phase_state(idx, theta_tilde)
    prev = theta_tilde
    for th in seen:
        i = int(rng.integers(idx.n_failures))
        d = (naive_gradient_rank(idx, i, prev) - cache.subgradients[i] + cache.full_gradient)
        np.testing.assert_allclose(th, prev - gamma * d, atol=1e-14)
        prev = th


def naive_gradient_rank(idx, k, theta):
    from conftest import naive_term_gradient

    return naive_term_gradient(idx.data, idx.failure_patients[k], theta)


def test_first_step_matches_hand_computation():
    # m = 1 and theta^0 = anchor: the direction reduces to the full gradient
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    data = SurvivalDataset(X, [3.0, 1.0, 2.0], [True, True, False])
    idx = build_risk_index(data)
    pen = ElasticNetPenalty(0.2, 0.5)
    gamma = 0.3
    g = naive_gradient(data, np.zeros(2))
    expected = pen.prox(-gamma * g, gamma)
    res = two_svrg(idx, pen, SolverConfig(phases=1, step_size=gamma, phase_length=1, switch_phase=1,
                                          estimator="EXACT"))
    np.testing.assert_allclose(res.anchors[0], expected, atol=1e-15)
    big = two_svrg(idx, pen, SolverConfig(phases=1, step_size=gamma, phase_length=1, switch_phase=1,
                                          estimator="NIS", schedule=ScheduleSpec.theory_strong(2.0, 1e-6)))
    # 10^6 draws: Monte Carlo error of order 1e-3 scaled by gamma
    np.testing.assert_allclose(big.anchors[0], expected, atol=2e-3)


def test_exact_direction_unbiased_over_i(toy):
    idx, _ = toy
    rng = np.random.default_rng(2)
    cache = cache_phase_state(idx, rng.standard_normal(3))
    theta = rng.standard_normal(3)
    subs = np.array([naive_gradient_rank(idx, k, theta) for k in range(idx.n_failures)])
    draws = rng.integers(idx.n_failures, size=10_000)
    dirs = subs[draws] - cache.subgradients[draws] + cache.full_gradient
    se = dirs.std(axis=0, ddof=1) / math.sqrt(len(dirs))
    assert np.all(np.abs(dirs.mean(axis=0) - full_gradient(idx, theta)) <= 3 * se)
