"""Adaptive noisy group testing.

Bayesian inference over who-is-infected vectors from pooled test
results, batch design that maximizes expected information (or any
plug-in utility), fast marginal decoding, policy simulation, and live
campaigns over HTTP.
"""

from .core import (
    Group,
    GroupBatch,
    NoiseModel,
    Prior,
    batch_log_likelihood,
    binary_entropy,
    group_status,
    sample_outcomes,
    test_log_likelihood,
)
from .decoder import LbpReport, detect_oscillation, hybrid_decode, lbp_decode
from .optimizer import GreedyConfig, greedy_generic, greedy_mimax
from .policies import Policy, PolicyContext, build_policy, policy_step
from .posterior import (
    DegenerateEvidenceError,
    ExactPosterior,
    ParticlePosterior,
    SequentialPosterior,
    SmcConfig,
    TemperingTrace,
    ess,
    exact_update,
    next_temperature,
    prior_particles,
    smc_update,
    systematic_resample,
)
from .simulator import (
    MetricsTable,
    SimulationConfig,
    Trajectory,
    aggregate_metrics,
    flatten_history,
    read_trajectories,
    run_batch,
    run_simulation,
    sensitivity_specificity,
    write_trajectories,
)
from .utility import (
    auc_of_scores,
    expected_auc_phi,
    expected_utility,
    mi_of_batch,
    mi_single_group,
    neg_entropy_phi,
)

__all__ = [
    "Group",
    "GroupBatch",
    "NoiseModel",
    "Prior",
    "batch_log_likelihood",
    "binary_entropy",
    "group_status",
    "sample_outcomes",
    "test_log_likelihood",
    "LbpReport",
    "detect_oscillation",
    "hybrid_decode",
    "lbp_decode",
    "GreedyConfig",
    "greedy_generic",
    "greedy_mimax",
    "Policy",
    "PolicyContext",
    "build_policy",
    "policy_step",
    "DegenerateEvidenceError",
    "ExactPosterior",
    "ParticlePosterior",
    "SequentialPosterior",
    "SmcConfig",
    "TemperingTrace",
    "ess",
    "exact_update",
    "next_temperature",
    "prior_particles",
    "smc_update",
    "systematic_resample",
    "MetricsTable",
    "SimulationConfig",
    "Trajectory",
    "aggregate_metrics",
    "flatten_history",
    "read_trajectories",
    "run_batch",
    "run_simulation",
    "sensitivity_specificity",
    "write_trajectories",
    "auc_of_scores",
    "expected_auc_phi",
    "expected_utility",
    "mi_of_batch",
    "mi_single_group",
    "neg_entropy_phi",
]
