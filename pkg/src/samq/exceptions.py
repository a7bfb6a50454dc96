"""Exception hierarchy for estimation, aggregation and diagnostics failures."""

from __future__ import annotations


class SamqError(Exception):
    """Base class for all errors raised by samq."""


class InvalidArgumentError(SamqError, ValueError):
    """An argument violates a documented precondition."""


class RewardBoundError(InvalidArgumentError):
    """A reward evaluation exceeded the declared R_max."""

    def __init__(self, message: str, value: float, r_max: float) -> None:
        super().__init__(message)
        self.value = value
        self.r_max = r_max


class ConvergenceError(SamqError, RuntimeError):
    """A fixed-point iteration stopped at max_iter above tolerance."""

    def __init__(self, message: str, residual: float, iterations: int) -> None:
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CoverageError(SamqError, ValueError):
    """An aggregated state-action cell (or estimation bin) has too few observations."""

    def __init__(self, message: str, cell: tuple[int, ...]) -> None:
        super().__init__(message)
        self.cell = cell


class BoundUndefinedError(SamqError, ValueError):
    """The finite-sample bound precondition does not hold."""

    def __init__(self, message: str, margin: float) -> None:
        super().__init__(message)
        self.margin = margin


class DiagnosticUnavailableError(SamqError, RuntimeError):
    """A diagnostic quantity cannot be computed for this instance."""


class ExperimentError(SamqError, RuntimeError):
    """Every replication of a benchmark cell failed."""
