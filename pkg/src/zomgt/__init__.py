"""Decentralized zeroth-order optimization with momentum gradient tracking."""

from .algorithms import ALGORITHMS, HyperParams, NetworkState, Trajectory, run
from .estimators import coordinate_full, rademacher_forward, sphere_central
from .harness import ExperimentConfig, load_config, run_experiment, sweep_beta
from .metrics import consensus_error, loglog_slope, steady_state_floor, tracking_error
from .problem import (
    Problem,
    global_gradient,
    local_loss,
    parse_libsvm,
    partition_pathological,
    synthetic_quadratic_problem,
)
from .topology import generate_erdos_renyi, metropolis_weights, spectral_gap, validate_mixing

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "HyperParams", "NetworkState", "Trajectory", "run",
    "coordinate_full", "rademacher_forward", "sphere_central",
    "ExperimentConfig", "load_config", "run_experiment", "sweep_beta",
    "consensus_error", "loglog_slope", "steady_state_floor", "tracking_error",
    "Problem", "global_gradient", "local_loss", "parse_libsvm",
    "partition_pathological", "synthetic_quadratic_problem",
    "generate_erdos_renyi", "metropolis_weights", "spectral_gap", "validate_mixing",
]
