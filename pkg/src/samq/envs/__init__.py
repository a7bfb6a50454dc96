"""Simulated decision environments and data generation."""

from __future__ import annotations

from .bus import ACTIONS, CONTINUE, REPLACE, make_bus_env, mileage_grid
from .simulation import (
    coverage_table,
    empirical_coverage,
    population_dataset,
    simulate,
    simulate_bus,
)

__all__ = [
    "ACTIONS",
    "CONTINUE",
    "REPLACE",
    "coverage_table",
    "empirical_coverage",
    "make_bus_env",
    "mileage_grid",
    "population_dataset",
    "simulate",
    "simulate_bus",
]
