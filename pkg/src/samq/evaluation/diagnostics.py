"""Exact inequality checks on small tabular instances.

Population quantities are computed from a weighted dataset that enumerates
the data distribution mu(s) * pi*(a|s) * P(s'|s, a), so both sides of every
inequality are exact up to solver tolerance.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import minimize

from ..core.clustering import aggregation_q_error
from ..core.fixed_point import iterate
from ..core.nfmle import EmpiricalKernel, compile_kernel
from ..core.soft_bellman import soft_q_solve, soft_values
from ..envs.simulation import population_dataset
from ..exceptions import DiagnosticUnavailableError, InvalidArgumentError
from ..models.aggregation import Aggregation
from ..models.data import Dataset
from ..models.mdp import FloatArray, LinearReward, MdpSpec, QFunction, ThetaVector
from ..models.reports import InequalityRecord

logger = logging.getLogger(__name__)

CERTIFIED_MAX_STATES = 10
CONCAVITY_FLOOR = 1e-12
SEGMENT_POINTS = (0.0, 0.25, 0.5, 0.75, 1.0)
DIAGNOSTIC_TOL = 1e-13


def q_error(q_true: QFunction, aggregation: Aggregation) -> float:
    """Q error of an aggregation measured with the true Q-function."""
    return aggregation_q_error(q_true, aggregation)


def fd_hessian(
    fn: Callable[[FloatArray], float], x: ArrayLike, h: float = 1e-3
) -> FloatArray:
    """Central-difference Hessian with per-coordinate step ``h * max(|x_k|, 1)``."""
    if h <= 0:
        raise InvalidArgumentError(f"h must be positive, got {h}")
    x0 = np.asarray(x, dtype=np.float64)
    k = len(x0)
    steps = h * np.maximum(np.abs(x0), 1.0)
    f0 = fn(x0)
    hessian = np.zeros((k, k))

    def shifted(i: int, si: float, j: int | None = None, sj: float = 0.0) -> float:
        point = x0.copy()
        point[i] += si * steps[i]
        if j is not None:
            point[j] += sj * steps[j]
        return fn(point)

    for i in range(k):
        hessian[i, i] = (shifted(i, 1) - 2 * f0 + shifted(i, -1)) / steps[i] ** 2
        for j in range(i + 1, k):
            value = (
                shifted(i, 1, j, 1)
                - shifted(i, 1, j, -1)
                - shifted(i, -1, j, 1)
                + shifted(i, -1, j, -1)
            ) / (4 * steps[i] * steps[j])
            hessian[i, j] = hessian[j, i] = value
    return hessian


def concavity_of(fn: Callable[[FloatArray], float], x: ArrayLike, h: float = 1e-3) -> float:
    """Smallest eigenvalue of the negated finite-difference Hessian."""
    hessian = fd_hessian(fn, x, h)
    return float(np.linalg.eigvalsh(-0.5 * (hessian + hessian.T)).min())


def kernel_log_likelihood(
    kernel: EmpiricalKernel, tol: float = DIAGNOSTIC_TOL
) -> Callable[[FloatArray], float]:
    """Aggregated log-likelihood as a function of raw parameter values."""

    def loglik(values: FloatArray) -> float:
        theta = ThetaVector(values)
        table = iterate(
            lambda t: kernel.apply(t, theta),
            np.zeros((kernel.n_s, kernel.n_actions)),
            modulus=kernel.gamma,
            tol=tol,
            max_iter=100000,
            label="diagnostic Q iteration",
        ).value
        return kernel.log_likelihood(table)

    return loglik


def estimate_concavity(
    dataset: Dataset,
    aggregation: Aggregation,
    theta: ThetaVector,
    h: float = 1e-3,
    *,
    reward: LinearReward,
    gamma: float | None = None,
    tol: float = DIAGNOSTIC_TOL,
) -> float:
    """Local strong-concavity constant of the aggregated likelihood at ``theta``.

    Positive values certify local strong concavity with that constant.
    """
    kernel = compile_kernel(dataset, aggregation, reward, gamma)
    value = concavity_of(kernel_log_likelihood(kernel, tol), theta.values, h)
    logger.debug(f"Concavity at {theta.tolist()}: {value:.6g}")
    return value


@dataclass
class PopulationAnalysis:
    """Population likelihoods of an MDP and an aggregation of its states."""

    mdp: MdpSpec
    theta_star: ThetaVector
    aggregation: Aggregation
    mu: FloatArray | None = None
    h: float = 1e-3

    @cached_property
    def dataset(self) -> Dataset:
        return population_dataset(self.mdp, self.theta_star, self.mu, tol=DIAGNOSTIC_TOL)

    @cached_property
    def kernel(self) -> EmpiricalKernel:
        return compile_kernel(self.dataset, self.aggregation, self.mdp.reward)

    @cached_property
    def q_star(self) -> QFunction:
        return soft_q_solve(self.mdp, self.theta_star, DIAGNOSTIC_TOL, max_iter=100000)

    @cached_property
    def eps_q(self) -> float:
        return q_error(self.q_star, self.aggregation)

    @property
    def certified(self) -> bool:
        return self.mdp.n_states <= CERTIFIED_MAX_STATES

    def aggregated_loglik(self, theta: ThetaVector | ArrayLike) -> float:
        values = theta.values if isinstance(theta, ThetaVector) else theta
        loglik = kernel_log_likelihood(self.kernel, DIAGNOSTIC_TOL)
        return loglik(np.asarray(values, dtype=np.float64))

    @cached_property
    def full_loglik_at_star(self) -> float:
        """Population log-likelihood of the true model at theta*."""
        table = self.q_star.table
        log_probs = table - soft_values(table)[:, None]
        rows = self.mdp.states.indices_of(self.dataset.states)
        return float(
            np.sum(self.dataset.weights * log_probs[rows, self.dataset.actions])
            / self.dataset.weights.sum()
        )

    @cached_property
    def likelihood_gap(self) -> float:
        """E[L - L~] at theta*, non-negative by Gibbs' inequality."""
        return max(0.0, self.full_loglik_at_star - self.aggregated_loglik(self.theta_star))

    @cached_property
    def theta_tilde(self) -> ThetaVector:
        """Maximizer of the population aggregated likelihood."""
        if self.eps_q == 0.0:
            return self.theta_star
        loglik = kernel_log_likelihood(self.kernel, DIAGNOSTIC_TOL)
        result = minimize(
            lambda x: -loglik(x),
            self.theta_star.values.copy(),
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000, "maxfev": 40000},
        )
        if not result.success or not np.all(np.isfinite(result.x)):
            raise DiagnosticUnavailableError(
                f"Population maximizer not found: {result.message}"
            )
        return ThetaVector(result.x)

    @cached_property
    def c_h(self) -> float:
        """Quadratic-growth modulus along the segment theta* -> theta~.

        Half the smallest eigenvalue of the negated Hessian over sampled points
        of the segment, so that E[L~](theta~) - E[L~](theta*) >= c_h |theta~ - theta*|^2.
        """
        loglik = kernel_log_likelihood(self.kernel, DIAGNOSTIC_TOL)
        start, end = self.theta_star.values, self.theta_tilde.values
        points = [start] if np.array_equal(start, end) else [
            start + t * (end - start) for t in SEGMENT_POINTS
        ]
        value = 0.5 * min(concavity_of(loglik, p, self.h) for p in points)
        if value <= CONCAVITY_FLOOR:
            raise DiagnosticUnavailableError(
                f"Aggregated likelihood is not strongly concave (constant {value:.3g})"
            )
        return value

    @property
    def theta_gap_sq(self) -> float:
        return self.theta_tilde.squared_distance(self.theta_star)

    def gap_record(self) -> InequalityRecord:
        """E[L(theta*) - L~(theta*)] <= 4 eps_Q / (1 - gamma)."""
        # eps_Q = 0 makes the aggregated model exact; the measured gap is round-off
        return InequalityRecord(
            name="likelihood_gap",
            lhs=0.0 if self.eps_q == 0.0 else self.likelihood_gap,
            rhs=4.0 * self.eps_q / (1.0 - self.mdp.gamma),
            certified=self.certified,
        )

    def lemma_record(self, c_h: float | None = None) -> InequalityRecord:
        """|theta~ - theta*|^2 <= E[L(theta*) - L~(theta*)] / C_H."""
        if self.eps_q == 0.0:
            return InequalityRecord(
                name="likelihood_bound", lhs=0.0, rhs=self.likelihood_gap,
                certified=self.certified,
            )
        return InequalityRecord(
            name="likelihood_bound",
            lhs=self.theta_gap_sq,
            rhs=self.likelihood_gap / self._constant(c_h),
            certified=self.certified,
        )

    def theorem1_record(self, c_h: float | None = None) -> InequalityRecord:
        """|theta~ - theta*|^2 <= 4 eps_Q / (C_H (1 - gamma))."""
        if self.eps_q == 0.0:
            return InequalityRecord(name="theorem1", lhs=0.0, rhs=0.0, certified=self.certified)
        return InequalityRecord(
            name="theorem1",
            lhs=self.theta_gap_sq,
            rhs=4.0 * self.eps_q / (self._constant(c_h) * (1.0 - self.mdp.gamma)),
            certified=self.certified,
        )

    def _constant(self, c_h: float | None) -> float:
        if c_h is None:
            return self.c_h
        if c_h <= 0:
            raise InvalidArgumentError(f"c_h must be positive, got {c_h}")
        return c_h


def _analysis(
    mdp: MdpSpec, theta_star: ThetaVector, aggregation: Aggregation, mu: ArrayLike | None
) -> PopulationAnalysis:
    mu_vec = None if mu is None else np.asarray(mu, dtype=np.float64)
    return PopulationAnalysis(mdp, theta_star, aggregation, mu_vec)


def population_theta_tilde(
    mdp: MdpSpec,
    theta_star: ThetaVector,
    aggregation: Aggregation,
    mu: ArrayLike | None = None,
) -> ThetaVector:
    return _analysis(mdp, theta_star, aggregation, mu).theta_tilde


def theorem1_check(
    mdp: MdpSpec,
    theta_star: ThetaVector,
    aggregation: Aggregation,
    c_h: float | None = None,
    mu: ArrayLike | None = None,
) -> InequalityRecord:
    """Asymptotic bound on the aggregation-induced parameter error.

    ``c_h=None`` measures the concavity constant on the population likelihood.

    Raises:
        DiagnosticUnavailableError: The population maximizer or a positive
            concavity constant cannot be found.
    """
    return _analysis(mdp, theta_star, aggregation, mu).theorem1_record(c_h)


def lemma_likelihood_bound_check(
    mdp: MdpSpec,
    theta_star: ThetaVector,
    aggregation: Aggregation,
    c_h: float | None = None,
    mu: ArrayLike | None = None,
) -> InequalityRecord:
    return _analysis(mdp, theta_star, aggregation, mu).lemma_record(c_h)


def likelihood_gap_check(
    mdp: MdpSpec,
    theta_star: ThetaVector,
    aggregation: Aggregation,
    mu: ArrayLike | None = None,
) -> InequalityRecord:
    return _analysis(mdp, theta_star, aggregation, mu).gap_record()


def population_checks(
    mdp: MdpSpec,
    theta_star: ThetaVector,
    aggregation: Aggregation,
    c_h: float | None = None,
    mu: ArrayLike | None = None,
) -> list[InequalityRecord]:
    """All population inequality records sharing one analysis."""
    analysis = _analysis(mdp, theta_star, aggregation, mu)
    return [analysis.gap_record(), analysis.lemma_record(c_h), analysis.theorem1_record(c_h)]
