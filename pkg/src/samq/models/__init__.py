"""Typed numeric containers and pydantic models."""

from __future__ import annotations

from .aggregation import Aggregation
from .config import BusEnvConfig, IrlOptions, NfmleOptions, SamqConfig
from .data import Dataset, DatasetMeta
from .experiment import BenchmarkRow, BenchmarkTable, DemoConfig, ExperimentConfig
from .mdp import LinearReward, MdpSpec, QFunction, StateIndex, ThetaVector
from .metrics import SolverMetrics
from .reports import BoundReport, EstimationReport, InequalityRecord, TraceEntry

__all__ = [
    "Aggregation",
    "BenchmarkRow",
    "BenchmarkTable",
    "BoundReport",
    "BusEnvConfig",
    "Dataset",
    "DatasetMeta",
    "DemoConfig",
    "EstimationReport",
    "ExperimentConfig",
    "InequalityRecord",
    "IrlOptions",
    "LinearReward",
    "MdpSpec",
    "NfmleOptions",
    "QFunction",
    "SamqConfig",
    "SolverMetrics",
    "StateIndex",
    "ThetaVector",
    "TraceEntry",
]
