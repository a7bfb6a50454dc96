"""Entropy-regularized Bellman primitives.

The soft Bellman operator maps a Q table to

    Q'(s, a) = r(s, a; theta) + gamma * sum_s' P[s, a, s'] * logsumexp(Q(s', .))

and its unique fixed point induces softmax choice probabilities.
"""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import logsumexp, softmax

from ..exceptions import InvalidArgumentError
from ..models.mdp import FloatArray, MdpSpec, QFunction, ThetaVector
from ..models.metrics import SolverMetrics
from .fixed_point import iterate

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10000


def log_sum_exp(values: ArrayLike) -> float:
    """Stabilized ``log(sum(exp(values)))``."""
    array = np.asarray(values, dtype=np.float64).reshape(-1)
    if array.size == 0:
        raise InvalidArgumentError("log_sum_exp of an empty vector")
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError("log_sum_exp needs finite entries")
    return float(logsumexp(array))


def soft_values(table: FloatArray) -> FloatArray:
    """Row-wise log-sum-exp of a Q table."""
    return np.asarray(logsumexp(table, axis=1), dtype=np.float64)


def soft_value(q: QFunction, s: int) -> float:
    return log_sum_exp(q.table[_check_row(q, s)])


def choice_prob(q: QFunction, s: int) -> FloatArray:
    """Softmax choice probabilities at row ``s``."""
    return np.asarray(softmax(q.table[_check_row(q, s)]), dtype=np.float64)


def choice_probs(table: FloatArray) -> FloatArray:
    return np.asarray(softmax(table, axis=1), dtype=np.float64)


def _check_row(q: QFunction, s: int) -> int:
    if not 0 <= s < q.n_states:
        raise InvalidArgumentError(f"State index {s} out of range [0, {q.n_states})")
    return int(s)


def bellman_table(
    table: FloatArray, rewards: FloatArray, transition: FloatArray, gamma: float
) -> FloatArray:
    """One soft Bellman application on raw arrays."""
    # einsum keeps a fixed reduction order independent of BLAS threading
    continuation = np.einsum("sat,t->sa", transition, soft_values(table))
    return rewards + gamma * continuation


def soft_bellman_apply(q: QFunction, mdp: MdpSpec, theta: ThetaVector) -> QFunction:
    if q.table.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidArgumentError(
            f"Q shape {q.table.shape} does not match MDP "
            f"({mdp.n_states}, {mdp.n_actions})"
        )
    rewards = mdp.reward_table(theta)
    return q.with_table(bellman_table(q.table, rewards, mdp.transition, mdp.gamma))


def soft_q_solve(
    mdp: MdpSpec,
    theta: ThetaVector,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    q0: QFunction | FloatArray | None = None,
    metrics: SolverMetrics | None = None,
) -> QFunction:
    """Solve the soft Bellman equation by successive approximation.

    Args:
        mdp: Model to solve.
        theta: Reward parameters.
        tol: Sup-norm tolerance on successive iterates.
        max_iter: Iteration cap; exceeding it raises ConvergenceError.
        q0: Optional warm start (table or QFunction on the same states).
        metrics: Optional sink for the iteration count.

    Returns:
        QFunction: The fixed point over ``mdp.states``.
    """
    rewards = mdp.reward_table(theta)
    if q0 is None:
        start = np.zeros((mdp.n_states, mdp.n_actions))
    else:
        start = np.asarray(q0.table if isinstance(q0, QFunction) else q0, dtype=np.float64)
        if start.shape != rewards.shape:
            raise InvalidArgumentError(
                f"Warm start shape {start.shape} does not match {rewards.shape}"
            )

    result = iterate(
        lambda table: bellman_table(table, rewards, mdp.transition, mdp.gamma),
        start,
        modulus=mdp.gamma,
        tol=tol,
        max_iter=max_iter,
        label="soft Q iteration",
    )
    if metrics is not None:
        metrics.record_inner(result.iterations)
    return QFunction(result.value, mdp.states)


def soft_q_iterations(
    mdp: MdpSpec, theta: ThetaVector, tol: float = DEFAULT_TOL
) -> tuple[QFunction, int]:
    """Like :func:`soft_q_solve` but also returns the iteration count."""
    metrics = SolverMetrics()
    q = soft_q_solve(mdp, theta, tol, metrics=metrics)
    return q, metrics.total_inner_iterations
