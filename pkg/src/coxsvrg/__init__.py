"""Doubly stochastic variance-reduced proximal gradient for penalized Cox regression."""
from .estimators import (
    BiasVarianceReport,
    EstimatorConfig,
    EstimatorKind,
    assess_estimator,
    estimate_gradient,
    imh_chain,
    imh_estimate,
    nis_estimate,
)
from .penalty import ElasticNetPenalty, objective, penalty_value, prox_elastic_net
from .simulate import SimulationConfig, simulate, write_simulated
from .solvers import (
    ConvergenceTrace,
    ConvexityConstants,
    ScheduleRule,
    ScheduleSpec,
    SolverConfig,
    averaged_iterate,
    convexity_constants,
    contraction_rho,
    fista,
    hsvrg,
    prox_gradient,
    prox_svrg_minibatch,
    schedule_N,
    two_svrg,
)
from .survival import (
    InnerProductLedger,
    PhaseCache,
    RiskSetIndex,
    SurvivalDataset,
    build_risk_index,
    cache_phase_state,
    full_gradient,
    load_csv,
    minibatch_gradient,
    neg_partial_loglik,
    save_csv,
    softmax_weights,
    subfunction_gradient,
)

__version__ = "0.1.0"
