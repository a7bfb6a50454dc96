"""Nested fixed-point maximum likelihood on aggregated states.

The inner problem solves the sample-based aggregated Bellman equation

    Q(c, a) = mean_{i in cell (c, a)} [ r(s_i, a; theta) + gamma * lse(Q(rep(s'_i), .)) ]

over the n_s x n_a cells of an aggregation; the outer problem maximizes the
average log choice probability of the observed actions over theta.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..exceptions import CoverageError, InvalidArgumentError
from ..models.aggregation import Aggregation
from ..models.config import NfmleOptions
from ..models.data import Dataset
from ..models.mdp import FloatArray, LinearReward, MdpSpec, ThetaVector
from ..models.metrics import SolverMetrics
from ..models.reports import EstimationReport, TraceEntry
from .fixed_point import iterate
from .soft_bellman import bellman_table, soft_values

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AggregatedQ:
    """Q table over (representative, action) cells."""

    table: FloatArray
    aggregation: Aggregation

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != self.aggregation.n_s:
            raise InvalidArgumentError(
                f"Aggregated Q shape {table.shape} does not match n_s={self.aggregation.n_s}"
            )
        if not np.all(np.isfinite(table)):
            raise InvalidArgumentError("Aggregated Q entries must be finite")
        object.__setattr__(self, "table", table)

    def at(self, points: FloatArray) -> FloatArray:
        """Rows for arbitrary assigned states (constant within clusters)."""
        return self.table[self.aggregation.labels_of(points)]


@dataclass(frozen=True)
class EmpiricalKernel:
    """Sufficient statistics of a dataset under an aggregation.

    ``features[c, a]`` is the weighted mean reward feature of cell (c, a),
    ``transition[c, a, c']`` the weighted share of its successors projecting to
    representative c', and ``frequency[c, a]`` the cell's share of all weight.
    """

    features: FloatArray
    transition: FloatArray
    frequency: FloatArray
    counts: FloatArray
    gamma: float
    aggregation: Aggregation

    @property
    def n_s(self) -> int:
        return int(self.frequency.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.frequency.shape[1])

    def rewards(self, theta: ThetaVector) -> FloatArray:
        if len(theta) != self.features.shape[2]:
            raise InvalidArgumentError(
                f"Expected {self.features.shape[2]} parameters, got {len(theta)}"
            )
        return self.features @ theta.values

    def apply(self, table: FloatArray, theta: ThetaVector) -> FloatArray:
        return bellman_table(table, self.rewards(theta), self.transition, self.gamma)

    def log_likelihood(self, table: FloatArray) -> float:
        log_probs = table - soft_values(table)[:, None]
        return float(np.sum(self.frequency * log_probs))


def compile_kernel(
    dataset: Dataset,
    aggregation: Aggregation,
    reward: LinearReward,
    gamma: float | None = None,
    *,
    min_cell_count: int = 1,
) -> EmpiricalKernel:
    """Tabulate the aggregated operator's inputs once per dataset and aggregation.

    Raises:
        CoverageError: A (cluster, action) cell has fewer than ``min_cell_count``
            transitions.
    """
    gamma = dataset.gamma if gamma is None else gamma
    if not 0.0 <= gamma < 1.0:
        raise InvalidArgumentError(f"gamma must lie in [0, 1), got {gamma}")
    n_s, n_a = aggregation.n_s, dataset.n_actions
    n_cells = n_s * n_a

    source = aggregation.labels_of(dataset.states)
    successor = aggregation.labels_of(dataset.next_states)
    cells = source * n_a + dataset.actions
    weights = dataset.weights

    counts = np.bincount(cells, minlength=n_cells).astype(np.float64)
    if np.any(counts < min_cell_count):
        bad = int(np.flatnonzero(counts < min_cell_count)[0])
        cluster, action = divmod(bad, n_a)
        rep = aggregation.representative_points[cluster].tolist()
        raise CoverageError(
            f"Cell (cluster {cluster} at {rep}, action {action}) has "
            f"{int(counts[bad])} transitions, fewer than {min_cell_count}",
            cell=(cluster, action),
        )
    mass = np.bincount(cells, weights=weights, minlength=n_cells)
    if np.any(mass <= 0):
        bad = int(np.flatnonzero(mass <= 0)[0])
        raise CoverageError(
            f"Cell {divmod(bad, n_a)} carries zero weight", cell=divmod(bad, n_a)
        )

    phi = reward.features(dataset.states, dataset.actions)
    features = np.stack(
        [
            np.bincount(cells, weights=weights * phi[:, k], minlength=n_cells)
            for k in range(phi.shape[1])
        ],
        axis=1,
    ) / mass[:, None]
    transition = np.bincount(
        cells * n_s + successor, weights=weights, minlength=n_cells * n_s
    ).reshape(n_cells, n_s) / mass[:, None]

    return EmpiricalKernel(
        features=features.reshape(n_s, n_a, -1),
        transition=transition.reshape(n_s, n_a, n_s),
        frequency=(mass / mass.sum()).reshape(n_s, n_a),
        counts=counts.reshape(n_s, n_a),
        gamma=gamma,
        aggregation=aggregation,
    )


def _solve_kernel(
    kernel: EmpiricalKernel,
    theta: ThetaVector,
    tol: float,
    max_iter: int,
    q0: FloatArray | None = None,
    metrics: SolverMetrics | None = None,
) -> FloatArray:
    rewards = kernel.rewards(theta)
    start = np.zeros_like(rewards) if q0 is None else q0
    result = iterate(
        lambda table: bellman_table(table, rewards, kernel.transition, kernel.gamma),
        start,
        modulus=kernel.gamma,
        tol=tol,
        max_iter=max_iter,
        label="aggregated Q iteration",
    )
    if metrics is not None:
        metrics.record_inner(result.iterations)
    return result.value


def empirical_bellman_apply(
    f: AggregatedQ,
    dataset: Dataset,
    theta: ThetaVector,
    gamma: float,
    *,
    reward: LinearReward,
    kernel: EmpiricalKernel | None = None,
) -> AggregatedQ:
    """One application of the sample-based aggregated Bellman operator."""
    kernel = kernel or compile_kernel(dataset, f.aggregation, reward, gamma)
    return AggregatedQ(kernel.apply(f.table, theta), f.aggregation)


def solve_aggregated_q(
    dataset: Dataset,
    aggregation: Aggregation,
    theta: ThetaVector,
    gamma: float,
    tol: float = 1e-10,
    *,
    reward: LinearReward,
    max_iter: int = 10000,
    q0: AggregatedQ | FloatArray | None = None,
    kernel: EmpiricalKernel | None = None,
    metrics: SolverMetrics | None = None,
) -> AggregatedQ:
    """Fixed point of the aggregated operator, optionally warm-started."""
    kernel = kernel or compile_kernel(dataset, aggregation, reward, gamma)
    start = None
    if q0 is not None:
        start = np.asarray(q0.table if isinstance(q0, AggregatedQ) else q0, dtype=np.float64)
        if start.shape != (kernel.n_s, kernel.n_actions):
            raise InvalidArgumentError(f"Warm start shape {start.shape} does not match")
    table = _solve_kernel(kernel, theta, tol, max_iter, start, metrics)
    return AggregatedQ(table, aggregation)


def aggregated_log_likelihood(
    dataset: Dataset,
    aggregation: Aggregation,
    theta: ThetaVector,
    gamma: float,
    *,
    reward: LinearReward,
    tol: float = 1e-10,
    max_iter: int = 10000,
    kernel: EmpiricalKernel | None = None,
) -> float:
    """Weighted average log choice probability under the aggregated model."""
    kernel = kernel or compile_kernel(dataset, aggregation, reward, gamma)
    table = _solve_kernel(kernel, theta, tol, max_iter)
    return kernel.log_likelihood(table)


# Outer optimization ------------------------------------------------------------


class _Objective:
    """Warm-started likelihood with best-so-far trace bookkeeping."""

    def __init__(
        self,
        evaluate: Callable[[ThetaVector, FloatArray | None], tuple[float, FloatArray]],
        template: ThetaVector,
        metrics: SolverMetrics,
    ) -> None:
        self._evaluate = evaluate
        self.template = template
        self._warm: FloatArray | None = None
        self.metrics = metrics
        self.trace: list[TraceEntry] = []
        self.best_theta = template
        self.best_value = -np.inf

    def __call__(self, values: FloatArray) -> float:
        theta = self.template.project(values)
        self.metrics.record_evaluation()
        value, table = self._evaluate(theta, self._warm)
        self._warm = table
        if value > self.best_value:
            self.best_value = value
            self.best_theta = theta
            self.trace.append(TraceEntry(theta=theta.tolist(), log_likelihood=value))
        return value


def _gradient(objective: _Objective, x: FloatArray, step: float) -> FloatArray:
    grad = np.zeros_like(x)
    for k in range(len(x)):
        h = step * max(abs(x[k]), 1.0)
        e = np.zeros_like(x)
        e[k] = h
        grad[k] = (objective(x + e) - objective(x - e)) / (2 * h)
    return grad


def _gradient_ascent(
    objective: _Objective, x0: FloatArray, opts: NfmleOptions
) -> tuple[bool, str]:
    """Central-difference gradient ascent with backtracking."""
    x = x0.copy()
    value = objective(x)
    step = 1.0
    for _ in range(opts.max_outer_iter):
        grad = _gradient(objective, x, opts.fd_step)
        if float(np.linalg.norm(grad)) <= opts.grad_tol:
            return True, "gradient norm below tolerance"
        while step > 1e-12:
            candidate = objective.template.project(x + step * grad).values
            new_value = objective(candidate)
            if new_value > value:
                moved = float(np.max(np.abs(candidate - x)))
                improved = new_value - value
                x, value = candidate, new_value
                step *= 2.0
                if moved <= opts.xatol and improved <= opts.fatol:
                    return True, "step and likelihood change below tolerance"
                break
            step *= 0.5
        else:
            return False, f"no ascent step found (gradient norm {np.linalg.norm(grad):.3e})"
    return False, f"reached {opts.max_outer_iter} outer iterations"


def _maximize(
    evaluate: Callable[[ThetaVector, FloatArray | None], tuple[float, FloatArray]],
    theta_init: ThetaVector,
    opts: NfmleOptions,
    method: str,
    metrics: SolverMetrics,
) -> EstimationReport:
    template = theta_init
    if opts.bounds is not None:
        template = ThetaVector(theta_init.values, tuple(opts.bounds))
    objective = _Objective(evaluate, template, metrics)
    start = time.perf_counter()
    phase = metrics.start_phase("optimization")

    objective(template.values)
    if opts.optimizer == "nelder-mead":
        result = minimize(
            lambda x: -objective(x),
            template.values.copy(),
            method="Nelder-Mead",
            options={
                "xatol": opts.xatol,
                "fatol": opts.fatol,
                "maxiter": opts.max_outer_iter,
                "maxfev": 10 * opts.max_outer_iter,
            },
        )
        converged, message = bool(result.success), str(result.message)
    else:
        converged, message = _gradient_ascent(objective, template.values.copy(), opts)

    metrics.end_phase("optimization", phase)
    if not converged:
        logger.warning(f"{method}: outer loop did not converge ({message}); keeping best-so-far")
    report = EstimationReport(
        method=method,
        theta_hat=objective.best_theta.tolist(),
        theta_init=theta_init.tolist(),
        log_likelihood=objective.best_value,
        inner_iterations=metrics.histogram(),
        outer_trace=objective.trace,
        n_evaluations=metrics.outer_evaluations,
        converged=converged,
        message=message,
        runtime_s=time.perf_counter() - start,
    )
    logger.info(
        f"{method}: theta_hat={np.round(report.theta_hat, 6).tolist()} "
        f"loglik={report.log_likelihood:.6f} ({report.n_evaluations} evaluations)"
    )
    return report


def nfmle_estimate(
    dataset: Dataset,
    aggregation: Aggregation,
    theta_init: ThetaVector,
    opts: NfmleOptions | None = None,
    *,
    reward: LinearReward,
    metrics: SolverMetrics | None = None,
) -> EstimationReport:
    """Maximize the aggregated likelihood over theta.

    Raises:
        CoverageError: Some (cluster, action) cell is empty; estimation aborts.
    """
    opts = opts or NfmleOptions()
    metrics = metrics or SolverMetrics()
    phase = metrics.start_phase("kernel")
    kernel = compile_kernel(
        dataset, aggregation, reward, min_cell_count=opts.min_cell_count
    )
    metrics.end_phase("kernel", phase)

    def evaluate(theta: ThetaVector, warm: FloatArray | None) -> tuple[float, FloatArray]:
        table = _solve_kernel(
            kernel, theta, opts.inner_tol, opts.inner_max_iter, warm, metrics
        )
        return kernel.log_likelihood(table), table

    report = _maximize(evaluate, theta_init, opts, "SAmQ-NF-MLE", metrics)
    return report.model_copy(update={"n_s": aggregation.n_s})


def exact_nfmle(
    dataset: Dataset,
    mdp: MdpSpec,
    theta_init: ThetaVector,
    opts: NfmleOptions | None = None,
    *,
    metrics: SolverMetrics | None = None,
) -> EstimationReport:
    """Maximize the full-state likelihood, solving the soft Bellman equation per theta."""
    opts = opts or NfmleOptions()
    metrics = metrics or SolverMetrics()
    if abs(dataset.gamma - mdp.gamma) > 1e-12:
        raise InvalidArgumentError("Dataset and MDP disagree on gamma")
    rows = mdp.states.indices_of(dataset.states)
    mass = np.bincount(
        rows * mdp.n_actions + dataset.actions,
        weights=dataset.weights,
        minlength=mdp.n_states * mdp.n_actions,
    ).reshape(mdp.n_states, mdp.n_actions)
    frequency = mass / mass.sum()
    features = mdp.features

    def evaluate(theta: ThetaVector, warm: FloatArray | None) -> tuple[float, FloatArray]:
        rewards = features @ theta.values
        if mdp.r_max is not None:
            rewards = mdp.reward_table(theta)
        start = np.zeros_like(rewards) if warm is None else warm
        result = iterate(
            lambda table: bellman_table(table, rewards, mdp.transition, mdp.gamma),
            start,
            modulus=mdp.gamma,
            tol=opts.inner_tol,
            max_iter=opts.inner_max_iter,
            label="soft Q iteration",
        )
        metrics.record_inner(result.iterations)
        table = result.value
        log_probs = table - soft_values(table)[:, None]
        return float(np.sum(frequency * log_probs)), table

    report = _maximize(evaluate, theta_init, opts, "NF-MLE", metrics)
    return report.model_copy(update={"n_s": None})

