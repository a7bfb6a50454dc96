"""Configuration models for estimation runs and simulated environments."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..exceptions import InvalidArgumentError

OptimizerName = Literal["nelder-mead", "gradient"]


class SamqConfig(BaseModel):
    """Solver and pipeline defaults shared by the library and the CLI."""

    # Inner fixed-point iteration
    tol: float = Field(
        default=1e-10, gt=0.0, description="Sup-norm successive-difference tolerance"
    )
    max_iter: int = Field(
        default=10000, ge=1, description="Maximum fixed-point iterations"
    )

    # Outer likelihood maximization
    outer_tol_theta: float = Field(
        default=1e-6, gt=0.0, description="Simplex diameter / step tolerance on theta"
    )
    outer_tol_loglik: float = Field(
        default=1e-8, gt=0.0, description="Tolerance on the log-likelihood"
    )
    max_outer_iter: int = Field(
        default=2000, ge=1, description="Maximum outer optimizer iterations"
    )
    optimizer: OptimizerName = Field(
        default="nelder-mead", description="Outer optimizer"
    )

    # Q estimation
    smoothing: float = Field(
        default=0.5, ge=0.0, description="Laplace smoothing for choice probabilities"
    )
    irl_bins: int | None = Field(
        default=None,
        ge=1,
        description="Bins per dimension for policy estimation (None = one per state)",
    )
    anchor_action: int = Field(
        default=0, ge=0, description="Anchor action for value identification"
    )

    # Aggregation
    kmeans_restarts: int = Field(default=10, ge=1, description="K-means restarts")
    min_cell_count: int = Field(
        default=1, ge=1, description="Minimum transitions per aggregated cell"
    )

    # Diagnostics
    fd_step: float = Field(
        default=1e-3, gt=0.0, description="Relative finite-difference step"
    )

    # Runtime
    workers: int = Field(default=1, ge=1, description="Parallel replication workers")
    log_file: Path | None = Field(
        default=None,
        description="File path to write logs to instead of stderr (None = use stderr)",
    )

    @staticmethod
    def _load_dotenv() -> None:
        """Load environment variables from .env file if it exists."""
        from dotenv import load_dotenv

        env_file = Path.cwd() / ".env"
        if env_file.exists():
            load_dotenv(env_file, override=False)

    @classmethod
    def from_env(cls) -> SamqConfig:
        """Create configuration from ``SAMQ_*`` environment variables.

        A ``.env`` file in the working directory is loaded first without
        overriding variables that are already set.
        """
        cls._load_dotenv()
        return cls(
            tol=float(os.getenv("SAMQ_TOL", "1e-10")),
            max_iter=int(os.getenv("SAMQ_MAX_ITER", "10000")),
            outer_tol_theta=float(os.getenv("SAMQ_OUTER_TOL_THETA", "1e-6")),
            outer_tol_loglik=float(os.getenv("SAMQ_OUTER_TOL_LOGLIK", "1e-8")),
            max_outer_iter=int(os.getenv("SAMQ_MAX_OUTER_ITER", "2000")),
            optimizer=os.getenv("SAMQ_OPTIMIZER", "nelder-mead"),  # type: ignore[arg-type]
            smoothing=float(os.getenv("SAMQ_SMOOTHING", "0.5")),
            irl_bins=int(bins) if (bins := os.getenv("SAMQ_IRL_BINS")) else None,
            anchor_action=int(os.getenv("SAMQ_ANCHOR_ACTION", "0")),
            kmeans_restarts=int(os.getenv("SAMQ_KMEANS_RESTARTS", "10")),
            min_cell_count=int(os.getenv("SAMQ_MIN_CELL_COUNT", "1")),
            fd_step=float(os.getenv("SAMQ_FD_STEP", "1e-3")),
            workers=int(os.getenv("SAMQ_WORKERS", "1")),
            log_file=Path(log_path)
            if (log_path := os.getenv("SAMQ_LOG_FILE"))
            else None,
        )

    def irl_options(self) -> IrlOptions:
        return IrlOptions(
            bins=self.irl_bins,
            smoothing=self.smoothing,
            anchor_action=self.anchor_action,
            tol=self.tol,
            max_iter=self.max_iter,
        )

    def nfmle_options(self) -> NfmleOptions:
        return NfmleOptions(
            optimizer=self.optimizer,
            xatol=self.outer_tol_theta,
            fatol=self.outer_tol_loglik,
            max_outer_iter=self.max_outer_iter,
            inner_tol=self.tol,
            inner_max_iter=self.max_iter,
            min_cell_count=self.min_cell_count,
        )


class IrlOptions(BaseModel):
    """Options for Q-function estimation from choice data."""

    model_config = ConfigDict(frozen=True)

    bins: int | None = Field(default=None, ge=1)
    smoothing: float = Field(default=0.5, ge=0.0)
    anchor_action: int = Field(default=0, ge=0)
    tol: float = Field(default=1e-10, gt=0.0)
    max_iter: int = Field(default=10000, ge=1)


class NfmleOptions(BaseModel):
    """Options for nested fixed-point likelihood maximization."""

    model_config = ConfigDict(frozen=True)

    optimizer: OptimizerName = "nelder-mead"
    xatol: float = Field(default=1e-6, gt=0.0)
    fatol: float = Field(default=1e-8, gt=0.0)
    max_outer_iter: int = Field(default=2000, ge=1)
    inner_tol: float = Field(default=1e-10, gt=0.0)
    inner_max_iter: int = Field(default=10000, ge=1)
    grad_tol: float = Field(default=1e-6, gt=0.0)
    fd_step: float = Field(default=1e-5, gt=0.0)
    min_cell_count: int = Field(default=1, ge=1)
    bounds: list[tuple[float, float]] | None = None


class BusEnvConfig(BaseModel):
    """Bus engine replacement world, optionally padded with dummy state dimensions."""

    model_config = ConfigDict(extra="forbid")

    mileage_grid_size: int = Field(default=200, ge=2)
    mileage_max: float | None = Field(
        default=None, gt=0.0, description="mileage of the last grid point (grid_size - 1 if unset)"
    )
    theta_true: list[float] = Field(
        default_factory=lambda: [0.1, 5.0],
        min_length=2,
        max_length=2,
        description="(per-mile maintenance cost, replacement cost)",
    )
    gamma: float = Field(default=0.95, ge=0.0, lt=1.0)
    drift: list[float] = Field(default_factory=lambda: [0.3, 0.5, 0.2], min_length=1)
    dummy_dims: int = Field(default=0, ge=0)
    dummy_range: tuple[float, float] = (-5.0, 5.0)
    dummy_grid_size: int = Field(default=5, ge=1)
    init: Literal["uniform", "chained"] = "uniform"
    r_max: float | None = Field(default=None, ge=0.0)

    @field_validator("drift")
    @classmethod
    def _drift_is_distribution(cls, drift: list[float]) -> list[float]:
        if any(p < 0 for p in drift) or abs(sum(drift) - 1.0) > 1e-9:
            raise ValueError(f"drift must be a probability vector, got {drift}")
        return drift

    @field_validator("dummy_range")
    @classmethod
    def _range_is_ordered(cls, bounds: tuple[float, float]) -> tuple[float, float]:
        if not bounds[0] < bounds[1]:
            raise ValueError(f"dummy_range must be well-ordered, got {bounds}")
        return bounds

    @property
    def n_states(self) -> int:
        return self.mileage_grid_size * self.dummy_grid_size**self.dummy_dims

    def digest(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()[:16]


M = TypeVar("M", bound=BaseModel)


def validated(model: type[M], **values: object) -> M:
    """Construct a model, re-raising pydantic failures as InvalidArgumentError."""
    from pydantic import ValidationError

    try:
        return model(**values)
    except ValidationError as e:
        raise InvalidArgumentError(str(e)) from e

