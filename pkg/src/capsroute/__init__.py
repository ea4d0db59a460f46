"""Dynamic routing between capsules as constrained nonlinear gradient descent.

The routing procedure that iteratively re-weights capsule votes is, in
matrix form, a mirror-style descent on a concave energy over
row-stochastic couplings. This package implements both the scalar and
matrix procedures, the energy functions and conjugates behind them, and
the diagnostics (descent gaps, gradient checks, convexity probes) that
verify the convergence claim at machine precision, plus seeded
experiments showing the objective trajectory and the polarization of
coupling rows.
"""

from .energy import (
    GapReport,
    big_phi,
    big_phi_star,
    big_psi,
    chord_convexity_probe,
    fd_gradient,
    fenchel_gap,
    grad_big_phi,
    grad_big_psi,
    lyapunov_gap,
)
from .experiments import (
    COLLAPSE_THRESHOLD,
    ExperimentReport,
    InstanceInfo,
    gen_random_instance,
    gen_ring_instance,
    mean_row_entropy,
    polarization_metrics,
    run_distribution_experiment,
    run_numerical_experiment,
)
from .routing import (
    RoutingState,
    compare_trajectories,
    initial_state,
    nonlinear_gd_step,
    route_matrix,
    route_scalar,
    routing_step,
)
from .scalarmath import log_sum_exp, neg_entropy, psi, psi_prime, softmax, squash
from .suite import CheckResult, run_check_suite, seeded_instance, summary_csv
from .types import (
    CouplingMatrix,
    LogitMatrix,
    OutputSet,
    PredictionSet,
    RoutingConfig,
    RoutingTrajectory,
    TrajectoryRecord,
    uniform_coupling,
    validate_prediction_set,
)

__version__ = "0.1.0"

__all__ = [
    "GapReport",
    "big_phi",
    "big_phi_star",
    "big_psi",
    "chord_convexity_probe",
    "fd_gradient",
    "fenchel_gap",
    "grad_big_phi",
    "grad_big_psi",
    "lyapunov_gap",
    "COLLAPSE_THRESHOLD",
    "ExperimentReport",
    "InstanceInfo",
    "gen_random_instance",
    "gen_ring_instance",
    "mean_row_entropy",
    "polarization_metrics",
    "run_distribution_experiment",
    "run_numerical_experiment",
    "RoutingState",
    "compare_trajectories",
    "initial_state",
    "nonlinear_gd_step",
    "route_matrix",
    "route_scalar",
    "routing_step",
    "log_sum_exp",
    "neg_entropy",
    "psi",
    "psi_prime",
    "softmax",
    "squash",
    "CheckResult",
    "run_check_suite",
    "seeded_instance",
    "summary_csv",
    "CouplingMatrix",
    "LogitMatrix",
    "OutputSet",
    "PredictionSet",
    "RoutingConfig",
    "RoutingTrajectory",
    "TrajectoryRecord",
    "uniform_coupling",
    "validate_prediction_set",
]
