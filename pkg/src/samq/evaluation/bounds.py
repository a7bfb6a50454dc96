"""Finite-sample bound calculator and the constants that feed it."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, Field
from rich.console import Console
from rich.table import Table

from ..core.clustering import aggregation_q_error
from ..core.soft_bellman import soft_q_solve
from ..envs.simulation import empirical_coverage
from ..exceptions import BoundUndefinedError, DiagnosticUnavailableError, InvalidArgumentError
from ..models.aggregation import Aggregation
from ..models.data import Dataset
from ..models.mdp import MdpSpec, QFunction, ThetaVector
from ..models.reports import BoundReport, EstimationReport
from .diagnostics import (
    CERTIFIED_MAX_STATES,
    DIAGNOSTIC_TOL,
    PopulationAnalysis,
    estimate_concavity,
)

logger = logging.getLogger(__name__)

DEFAULT_THETA_BOX = (-10.0, 10.0)
DEFAULT_THETA_RESOLUTION = 0.01
PARTITION_MAX_STATES = 10


class BoundInputs(BaseModel):
    """Problem constants entering the finite-sample bound."""

    gamma: float = Field(ge=0.0, lt=1.0)
    r_max: float = Field(ge=0.0)
    c_h: float = Field(gt=0.0, description="Strong-concavity constant")
    c_uni: float = Field(gt=0.0, le=1.0, description="Minimum aggregated cell frequency")
    n_s: int = Field(ge=1)
    n_a: int = Field(ge=2)
    c_q: float = Field(default=0.0, ge=0.0, description="IRL sup-error constant")
    c_clustering: float = Field(default=0.0, ge=0.0)


class Theorem2Result(BaseModel):
    bias: float = Field(ge=0.0)
    variance: float = Field(ge=0.0)
    total: float = Field(ge=0.0)


def theta_cardinality(
    n_param: int,
    box: tuple[float, float] = DEFAULT_THETA_BOX,
    resolution: float = DEFAULT_THETA_RESOLUTION,
) -> float:
    """Covering-number proxy for a continuous box: volume / resolution^n_param."""
    lo, hi = box
    if n_param < 1 or hi <= lo or resolution <= 0:
        raise InvalidArgumentError(
            f"Invalid parameter box {box} / resolution {resolution} for {n_param} params"
        )
    return float(((hi - lo) / resolution) ** n_param)


def theorem2_bound(
    inputs: BoundInputs, n: int, delta: float, theta_card: float
) -> Theorem2Result:
    """Bias and variance terms of the high-probability bound on |theta_hat - theta*|.

    Raises:
        BoundUndefinedError: ``n`` is too small for the coverage precondition,
            or ``n_s < 2`` makes the discretization term infinite.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    if theta_card < 1:
        raise InvalidArgumentError(f"theta_card must be >= 1, got {theta_card}")

    gamma, r1, c_h = inputs.gamma, inputs.r_max + 1.0, inputs.c_h
    cells = inputs.n_s * inputs.n_a

    spread = inputs.n_s ** (1.0 / inputs.n_a) - 1.0
    if spread <= 0:
        raise BoundUndefinedError(
            f"Bound needs n_s >= 2, got n_s={inputs.n_s}", margin=spread
        )
    margin = n * inputs.c_uni - math.sqrt(n * math.log(4 * cells * theta_card / delta) / 2)
    if margin < 1:
        raise BoundUndefinedError(
            f"N={n} too small for C_uni={inputs.c_uni:.4g}: precondition margin "
            f"{margin:.4g} < 1",
            margin=margin,
        )

    bias = (
        4.0
        / (c_h * (1 - gamma))
        * (r1 / (1 - gamma) * 4.0 / spread + 2 * inputs.c_q + inputs.c_clustering)
    )
    v1 = 4 * r1 / ((1 - gamma) * c_h) * math.sqrt(math.log(4 * theta_card / delta) / (2 * n))
    deviation = math.sqrt(math.log(4 * cells * theta_card / delta) / (2 * n))
    v2 = (
        r1
        / ((1 - gamma) ** 2 * c_h)
        * math.sqrt(math.log(8 * cells * theta_card / delta) / (2 * n))
        * 4.0
        / (inputs.c_uni - deviation)
    )
    return Theorem2Result(bias=bias, variance=v1 + v2, total=bias + v1 + v2)


def theorem2_sweep(
    inputs: BoundInputs,
    n_s_values: Iterable[int],
    n: int,
    delta: float,
    theta_card: float,
    coverage_scale: float = 1.0,
) -> dict[int, Theorem2Result]:
    """Bound over n_s with C_uni = coverage_scale / (n_s * n_a); undefined points are skipped."""
    results: dict[int, Theorem2Result] = {}
    for n_s in n_s_values:
        c_uni = min(1.0, coverage_scale / (n_s * inputs.n_a))
        point = inputs.model_copy(update={"n_s": n_s, "c_uni": c_uni})
        try:
            results[n_s] = theorem2_bound(point, n, delta, theta_card)
        except BoundUndefinedError as e:
            logger.debug(f"Skipping n_s={n_s}: {e}")
    return results


def irl_q_error(q_hat: QFunction, q_true: QFunction) -> float:
    """Sup error of an estimated Q after removing the best constant shift.

    Anchor-based estimates identify Q up to one additive constant, which the
    likelihood never sees.
    """
    diff = q_hat.table - q_true.rows(q_hat.index.points)
    return float((diff.max() - diff.min()) / 2)


def optimal_aggregation_error(q: QFunction, n_s: int) -> float:
    """Smallest aggregation error over every partition of q's states into n_s clusters.

    Exhaustive over set partitions, for at most ten states.
    """
    vectors = q.table
    n_states = len(vectors)
    if n_states > PARTITION_MAX_STATES:
        raise DiagnosticUnavailableError(
            f"Exact partition search is limited to {PARTITION_MAX_STATES} states, "
            f"got {n_states}"
        )
    if not 1 <= n_s <= n_states:
        raise InvalidArgumentError(f"n_s must lie in [1, {n_states}], got {n_s}")

    distance = np.max(np.abs(vectors[:, None, :] - vectors[None, :, :]), axis=2)
    full = (1 << n_states) - 1
    cost = np.zeros(full + 1)
    for mask in range(1, full + 1):
        members = [i for i in range(n_states) if mask >> i & 1]
        # best representative of the cluster, taken among its members
        cost[mask] = distance[np.ix_(members, members)].max(axis=0).min()

    best = cost.copy()
    for _ in range(2, n_s + 1):
        layer = np.full(full + 1, np.inf)
        for mask in range(1, full + 1):
            low = mask & -mask
            sub = mask
            while sub:
                if sub & low and sub != mask:
                    value = max(cost[sub], best[mask ^ sub])
                    if value < layer[mask]:
                        layer[mask] = value
                sub = (sub - 1) & mask
        best = layer
    return float(best[full])


def clustering_constant(q_hat: QFunction, aggregation: Aggregation) -> float:
    """|eps_dis_hat(aggregation) - eps_dis_hat(optimal aggregation)| under q_hat."""
    restricted = QFunction(q_hat.rows(aggregation.states.points), aggregation.states)
    optimal = optimal_aggregation_error(restricted, aggregation.n_s)
    return abs(aggregation_q_error(q_hat, aggregation) - optimal)


def build_bound_report(
    dataset: Dataset,
    mdp: MdpSpec,
    q_hat: QFunction,
    aggregation: Aggregation,
    estimate: EstimationReport,
    theta_star: ThetaVector | Sequence[float] | None = None,
    *,
    delta: float = 0.05,
    theta_card: float | None = None,
    h: float = 1e-3,
) -> BoundReport:
    """Measure every bound constant available for one estimation instance.

    Quantities needing the true parameters are filled only when
    ``theta_star`` is given; exact population checks only run on MDPs with
    at most ten states whose every state is aggregated.
    """
    notes: list[str] = []
    theta_hat = estimate.theta
    eps_dis_hat = aggregation_q_error(q_hat, aggregation)
    c_uni = empirical_coverage(dataset, aggregation)
    r_max = (
        mdp.r_max
        if mdp.r_max is not None
        else float(np.max(np.abs(mdp.reward_table(theta_hat))))
    )

    concavity = estimate_concavity(
        dataset, aggregation, theta_hat, h, reward=mdp.reward, gamma=mdp.gamma
    )
    c_h = concavity if concavity > 0 else None
    if c_h is None:
        notes.append(f"Aggregated likelihood not locally concave ({concavity:.3g})")

    c_clustering: float | None = None
    if len(aggregation.states) <= PARTITION_MAX_STATES:
        c_clustering = clustering_constant(q_hat, aggregation)
    else:
        notes.append("C_clustering unavailable above ten states")

    report = BoundReport(
        eps_dis_hat=eps_dis_hat,
        c_h=c_h,
        c_uni=c_uni,
        r_max=r_max,
        gamma=mdp.gamma,
        n_s=aggregation.n_s,
        n_a=mdp.n_actions,
        n_param=mdp.n_params,
        n=dataset.n,
        c_clustering=c_clustering,
        notes=notes,
    )

    c_q = 0.0
    if theta_star is not None:
        star = theta_star if isinstance(theta_star, ThetaVector) else ThetaVector.of(*theta_star)
        q_star = soft_q_solve(mdp, star, DIAGNOSTIC_TOL, max_iter=100000)
        report.eps_q = aggregation_q_error(q_star, aggregation)
        report.theta_gap = math.sqrt(theta_hat.squared_distance(star))
        c_q = irl_q_error(q_hat, q_star)
        _add_population_checks(report, mdp, star, aggregation)
    else:
        notes.append("theta* unknown: eps_Q, C_Q and population checks skipped")

    if c_h is not None and c_uni > 0:
        card = theta_card or theta_cardinality(mdp.n_params)
        notes.append(f"|Theta| proxy {card:.4g} (box volume over resolution grid)")
        inputs = BoundInputs(
            gamma=mdp.gamma,
            r_max=r_max,
            c_h=c_h,
            c_uni=c_uni,
            n_s=aggregation.n_s,
            n_a=mdp.n_actions,
            c_q=c_q,
            c_clustering=c_clustering or 0.0,
        )
        try:
            result = theorem2_bound(inputs, dataset.n, delta, card)
            report.thm2_bias, report.thm2_variance = result.bias, result.variance
        except BoundUndefinedError as e:
            notes.append(f"Finite-sample bound undefined: {e}")
    return report


def _add_population_checks(
    report: BoundReport, mdp: MdpSpec, theta_star: ThetaVector, aggregation: Aggregation
) -> None:
    if mdp.n_states > CERTIFIED_MAX_STATES or len(aggregation.states) != mdp.n_states:
        report.notes.append("Population checks need a fully aggregated MDP of <= 10 states")
        return
    analysis = PopulationAnalysis(mdp, theta_star, aggregation)
    report.inequalities.append(analysis.gap_record())
    try:
        lemma = analysis.lemma_record()
        theorem1 = analysis.theorem1_record()
    except DiagnosticUnavailableError as e:
        report.notes.append(f"Population concavity unavailable: {e}")
        return
    report.inequalities.extend([lemma, theorem1])
    report.thm1_bound = theorem1.rhs


def format_bound_table(report: BoundReport) -> str:
    """Render the constants and inequality records as Rich tables."""
    constants = Table(title="Bound Constants", show_header=False, box=None, padding=(0, 1))
    constants.add_column("Constant", style="bold cyan")
    constants.add_column("Value", style="green", justify="right")
    for name in ("eps_q", "eps_dis_hat", "c_h", "c_uni", "c_clustering", "r_max",
                 "theta_gap", "thm1_bound", "thm2_bias", "thm2_variance"):
        value = getattr(report, name)
        constants.add_row(name, "n/a" if value is None else f"{value:.6g}")
    constants.add_row("n_s / n_a / n", f"{report.n_s} / {report.n_a} / {report.n:,}")

    checks = Table(title="Inequalities")
    checks.add_column("Inequality", style="bold")
    checks.add_column("LHS", justify="right")
    checks.add_column("RHS", justify="right")
    checks.add_column("Slack", justify="right")
    checks.add_column("Holds", justify="center")
    for record in report.inequalities:
        mark = "[green]yes[/green]" if record.holds else "[red]no[/red]"
        if not record.certified:
            mark += " (approx)"
        checks.add_row(
            record.name, f"{record.lhs:.6g}", f"{record.rhs:.6g}", f"{record.slack:.6g}", mark
        )

    console = Console(width=100)
    with console.capture() as capture:
        console.print(constants)
        if report.inequalities:
            console.print(checks)
        for note in report.notes:
            console.print(f"[dim]- {note}[/dim]")
    return capture.get()
