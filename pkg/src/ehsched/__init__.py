"""Transmission power scheduling for remote state estimation over a lossy link.

A sensor with an energy-harvesting battery runs a local Kalman filter and
sends its estimate over a fading channel whose delivery odds improve with
transmission power.  This package solves for the power schedule minimizing
the long-run average estimation error (relative value iteration on the
lifted Markov decision process), analyzes the simple threshold schedule in
closed form, and cross-checks everything with a seeded Monte Carlo engine.
"""

from .channel import ChannelModel, drop_probability, sample_arrival, success_factor_from_params
from .chains import stationary_distribution
from .config import ConfigError, ExperimentConfig, load_config
from .energy import (
    Condition,
    EnergyModel,
    EnvironmentChain,
    HarvestDistribution,
    battery_after_harvest,
    battery_next,
    env_stationary,
    env_step,
    harvest_sample,
)
from .kalman import (
    CovarianceLadder,
    SystemModel,
    build_ladder,
    local_filter_step,
    lyapunov_step,
    remote_update,
    riccati_reduce,
    steady_state_covariance,
)
from .mdp import (
    LookupPolicy,
    MdpProblem,
    MdpState,
    SolveResult,
    SolverError,
    brute_force_average_cost,
    policy_evaluate_exact,
    policy_stationary,
    relative_value_iteration,
)
from .sim import GreedyPolicy, SimConfig, SimTrace, compare, greedy_policy, replication_streams, simulate
from .threshold import (
    ThresholdPolicy,
    build_transition_matrix,
    index_pair,
    pair_index,
    power_distribution,
    threshold_grid_search,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelModel",
    "Condition",
    "ConfigError",
    "CovarianceLadder",
    "EnergyModel",
    "EnvironmentChain",
    "ExperimentConfig",
    "GreedyPolicy",
    "HarvestDistribution",
    "LookupPolicy",
    "MdpProblem",
    "MdpState",
    "SimConfig",
    "SimTrace",
    "SolveResult",
    "SolverError",
    "SystemModel",
    "ThresholdPolicy",
    "battery_after_harvest",
    "battery_next",
    "brute_force_average_cost",
    "build_ladder",
    "build_transition_matrix",
    "compare",
    "drop_probability",
    "env_stationary",
    "env_step",
    "greedy_policy",
    "harvest_sample",
    "index_pair",
    "load_config",
    "local_filter_step",
    "lyapunov_step",
    "pair_index",
    "policy_evaluate_exact",
    "policy_stationary",
    "power_distribution",
    "relative_value_iteration",
    "remote_update",
    "replication_streams",
    "riccati_reduce",
    "sample_arrival",
    "simulate",
    "stationary_distribution",
    "steady_state_covariance",
    "success_factor_from_params",
    "threshold_grid_search",
    "__version__",
]
