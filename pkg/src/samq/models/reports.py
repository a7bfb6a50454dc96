"""Estimation and bound reports."""

from __future__ import annotations

from pathlib import Path

from pydantic import BaseModel, Field, model_validator

from .mdp import ThetaVector


class TraceEntry(BaseModel):
    """Accepted outer step: parameters and their log-likelihood."""

    theta: list[float]
    log_likelihood: float


class InequalityRecord(BaseModel):
    """Numerical evaluation of one inequality ``lhs <= rhs``."""

    name: str
    lhs: float
    rhs: float
    holds: bool = False
    certified: bool = Field(
        default=True,
        description="Both sides computed exactly (False for approximate instances)",
    )

    @model_validator(mode="after")
    def _set_holds(self) -> InequalityRecord:
        self.holds = bool(self.lhs <= self.rhs)
        return self

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


class BoundReport(BaseModel):
    """Measured constants and bound values for one estimation instance."""

    eps_q: float | None = Field(default=None, ge=0.0, description="True-Q error")
    eps_dis_hat: float = Field(ge=0.0, description="Estimated-Q aggregation error")
    c_h: float | None = Field(default=None, description="Concavity constant estimate")
    c_uni: float = Field(ge=0.0, description="Minimum aggregated cell frequency")
    r_max: float = Field(ge=0.0)
    gamma: float = Field(ge=0.0, lt=1.0)
    n_s: int = Field(ge=1)
    n_a: int = Field(ge=2)
    n_param: int = Field(ge=1)
    n: int = Field(ge=1)
    theta_gap: float | None = Field(default=None, ge=0.0)
    thm1_bound: float | None = Field(default=None, ge=0.0)
    thm2_bias: float | None = Field(default=None, ge=0.0)
    thm2_variance: float | None = Field(default=None, ge=0.0)
    c_clustering: float | None = Field(default=None, ge=0.0)
    notes: list[str] = Field(default_factory=list)
    inequalities: list[InequalityRecord] = Field(default_factory=list)

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")


class EstimationReport(BaseModel):
    """Outcome of one likelihood maximization."""

    method: str
    theta_hat: list[float]
    theta_init: list[float]
    log_likelihood: float
    inner_iterations: dict[int, int] = Field(default_factory=dict)
    outer_trace: list[TraceEntry] = Field(default_factory=list)
    n_evaluations: int = Field(default=0, ge=0)
    converged: bool = True
    message: str = ""
    n_s: int | None = None
    runtime_s: float = Field(default=0.0, ge=0.0)
    diagnostics: BoundReport | None = None

    @property
    def theta(self) -> ThetaVector:
        return ThetaVector.of(*self.theta_hat)

    def squared_error(self, theta_true: list[float] | ThetaVector) -> float:
        return self.theta.squared_distance(
            theta_true.values if isinstance(theta_true, ThetaVector) else theta_true
        )

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> EstimationReport:
        return cls.model_validate_json(path.read_text(encoding="utf-8"))
