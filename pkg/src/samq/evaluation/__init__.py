"""Diagnostics: Q errors, concavity constants, inequality checks and bounds."""

from .bounds import (
    BoundInputs,
    Theorem2Result,
    build_bound_report,
    clustering_constant,
    format_bound_table,
    irl_q_error,
    optimal_aggregation_error,
    theorem2_bound,
    theorem2_sweep,
    theta_cardinality,
)
from .diagnostics import (
    PopulationAnalysis,
    concavity_of,
    estimate_concavity,
    fd_hessian,
    lemma_likelihood_bound_check,
    likelihood_gap_check,
    population_checks,
    population_theta_tilde,
    q_error,
    theorem1_check,
)

__all__ = [
    "BoundInputs",
    "PopulationAnalysis",
    "Theorem2Result",
    "build_bound_report",
    "clustering_constant",
    "concavity_of",
    "estimate_concavity",
    "fd_hessian",
    "format_bound_table",
    "irl_q_error",
    "lemma_likelihood_bound_check",
    "likelihood_gap_check",
    "optimal_aggregation_error",
    "population_checks",
    "population_theta_tilde",
    "q_error",
    "theorem1_check",
    "theorem2_bound",
    "theorem2_sweep",
    "theta_cardinality",
]
