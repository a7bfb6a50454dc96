"""Experiment configurations and benchmark result tables."""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, model_validator

from .config import BusEnvConfig, NfmleOptions

MethodName = Literal["SAmQ", "NF-MLE", "NF-MLE-SA"]
METHOD_ORDER: tuple[MethodName, ...] = ("SAmQ", "NF-MLE-SA", "NF-MLE")


class ExperimentConfig(BaseModel):
    """Sweep of estimation methods over aggregation sizes and seeds."""

    env: BusEnvConfig = Field(default_factory=BusEnvConfig)
    n: int = Field(default=10000, ge=1, description="Transitions per replication")
    n_s_list: list[int] = Field(default_factory=lambda: [5, 10, 50, 100, 200])
    methods: list[MethodName] = Field(
        default_factory=lambda: ["SAmQ", "NF-MLE", "NF-MLE-SA"], min_length=1
    )
    replications: int = Field(default=10, ge=1)
    seed: int = 0
    gamma: float | None = Field(
        default=None, ge=0.0, lt=1.0, description="Overrides env.gamma when set"
    )
    theta_inits: list[list[float]] = Field(
        default_factory=lambda: [[0.05, 1.0]],
        min_length=1,
        description="Starting points; the best-likelihood run is kept",
    )
    anchor_action: int = Field(default=1, ge=0)
    smoothing: float = Field(default=0.5, ge=0.0)
    irl_bins: int | None = Field(default=None, ge=1)
    kmeans_restarts: int = Field(default=10, ge=1)
    nfmle: NfmleOptions = Field(default_factory=NfmleOptions)
    output_dir: Path | None = None
    workers: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_sweep(self) -> ExperimentConfig:
        if self.gamma is None:
            self.gamma = self.env.gamma
        elif self.gamma != self.env.gamma:
            self.env = self.env.model_copy(update={"gamma": self.gamma})
        if any(k < 1 or k > self.env.n_states for k in self.n_s_list):
            raise ValueError(
                f"n_s_list entries must lie in [1, {self.env.n_states}], "
                f"got {self.n_s_list}"
            )
        needs_n_s = any(m != "NF-MLE" for m in self.methods)
        if needs_n_s and not self.n_s_list:
            raise ValueError("n_s_list must be non-empty for aggregated methods")
        for theta in self.theta_inits:
            if len(theta) != len(self.env.theta_true):
                raise ValueError(f"theta_init {theta} has the wrong length")
        return self

    def digest(self) -> str:
        payload = self.model_dump_json(exclude={"output_dir", "workers"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class DemoConfig(BaseModel):
    """Dummy-state aggregation comparison."""

    env: BusEnvConfig = Field(
        default_factory=lambda: BusEnvConfig(
            mileage_grid_size=10,
            mileage_max=9.0,
            theta_true=[0.3, 3.0],
            dummy_dims=1,
            dummy_grid_size=3,
        )
    )
    n: int = Field(default=50000, ge=1)
    n_s: int = Field(default=10, ge=1)
    seed: int = 0
    anchor_action: int = Field(default=1, ge=0)
    smoothing: float = Field(default=0.5, ge=0.0)
    kmeans_restarts: int = Field(default=10, ge=1)
    output: Path | None = None

    @model_validator(mode="after")
    def _check_env(self) -> DemoConfig:
        if self.env.dummy_dims < 1:
            raise ValueError("The dummy-state demo needs env.dummy_dims >= 1")
        if self.n_s > self.env.n_states:
            raise ValueError(f"n_s={self.n_s} exceeds {self.env.n_states} states")
        return self


class BenchmarkRow(BaseModel):
    """Squared-error summary for one (method, n_s) cell."""

    method: MethodName
    n_s: int | None = None
    mse_mean: float
    mse_std: float = Field(ge=0.0)
    runtime_s: float = Field(ge=0.0)
    n: int = Field(ge=1)
    replications: int = Field(ge=0, description="Successful replications")
    failures: int = Field(default=0, ge=0)
    notes: list[str] = Field(default_factory=list)
    eps_dis_mean: float | None = None
    c_uni_mean: float | None = None
    init_sensitivity: float | None = Field(
        default=None, description="Mean spread of estimates across starting points"
    )


class BenchmarkTable(BaseModel):
    """Benchmark rows keyed by (method, n_s); NF-MLE rows carry ``n_s=None``."""

    rows: list[BenchmarkRow] = Field(default_factory=list)
    n_s_values: list[int] = Field(default_factory=list)
    config_digest: str | None = None

    def row(self, method: str, n_s: int | None = None) -> BenchmarkRow:
        for row in self.rows:
            if row.method == method and (row.n_s == n_s or row.n_s is None):
                return row
        raise KeyError((method, n_s))

    @property
    def methods(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row.method not in seen:
                seen.append(row.method)
        return seen
