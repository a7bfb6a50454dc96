"""Successive-approximation driver shared by every contraction in the package."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConvergenceError, InvalidArgumentError
from ..models.mdp import FloatArray

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedPoint:
    value: FloatArray
    iterations: int
    residual: float


def iterate(
    operator: Callable[[FloatArray], FloatArray],
    x0: FloatArray,
    *,
    modulus: float,
    tol: float,
    max_iter: int,
    label: str = "fixed point",
    steps: list[float] | None = None,
) -> FixedPoint:
    """Iterate ``x <- operator(x)`` until the sup-norm step is within ``tol``.

    ``residual`` is the last successive difference, so on return
    ``residual <= tol`` and ``|T(x) - x| <= modulus * tol``. An operator with
    modulus 0 is constant: its first image is the fixed point and is returned
    with residual 0. When ``steps`` is given every successive difference is
    appended to it.
    """
    if tol <= 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise InvalidArgumentError(f"max_iter must be >= 1, got {max_iter}")
    if modulus < 0:
        raise InvalidArgumentError(f"modulus must be >= 0, got {modulus}")
    if modulus == 0.0:
        logger.debug(f"{label}: constant operator, exact after one application")
        return FixedPoint(operator(x0), 1, 0.0)

    x = x0
    step = float("inf")
    for iteration in range(1, max_iter + 1):
        x_next = operator(x)
        step = float(np.max(np.abs(x_next - x))) if x_next.size else 0.0
        x = x_next
        if steps is not None:
            steps.append(step)
        if step <= tol:
            logger.debug(f"{label}: converged in {iteration} iterations (step {step:.3e})")
            return FixedPoint(x, iteration, step)

    raise ConvergenceError(
        f"{label} did not converge in {max_iter} iterations (last step {step:.3e})",
        residual=step,
        iterations=max_iter,
    )
