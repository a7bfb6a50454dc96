"""Estimation algorithms: soft Bellman solvers, Q estimation, aggregation, NF-MLE."""

from __future__ import annotations

from .clustering import (
    ad_hoc_aggregation,
    aggregation_q_error,
    cluster_states,
    project,
    q_distance,
)
from .fixed_point import FixedPoint, iterate
from .irl import QEstimate, estimate_policy, estimate_q, load_q_function
from .nfmle import (
    AggregatedQ,
    EmpiricalKernel,
    aggregated_log_likelihood,
    compile_kernel,
    empirical_bellman_apply,
    exact_nfmle,
    nfmle_estimate,
    solve_aggregated_q,
)
from .soft_bellman import (
    choice_prob,
    log_sum_exp,
    soft_bellman_apply,
    soft_q_solve,
    soft_value,
)

__all__ = [
    "AggregatedQ",
    "EmpiricalKernel",
    "FixedPoint",
    "QEstimate",
    "ad_hoc_aggregation",
    "aggregated_log_likelihood",
    "aggregation_q_error",
    "choice_prob",
    "cluster_states",
    "compile_kernel",
    "empirical_bellman_apply",
    "estimate_policy",
    "estimate_q",
    "exact_nfmle",
    "iterate",
    "load_q_function",
    "log_sum_exp",
    "nfmle_estimate",
    "project",
    "q_distance",
    "soft_bellman_apply",
    "soft_q_solve",
    "soft_value",
    "solve_aggregated_q",
]
