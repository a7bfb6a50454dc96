"""Experiment harness: method sweeps over aggregation sizes and the dummy-state demo."""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from collections.abc import Callable
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..core.clustering import ad_hoc_aggregation, aggregation_q_error, cluster_states
from ..core.irl import estimate_q
from ..core.nfmle import exact_nfmle, nfmle_estimate
from ..envs.simulation import empirical_coverage, simulate_bus
from ..exceptions import ExperimentError, InvalidArgumentError, SamqError
from ..models.aggregation import Aggregation
from ..models.config import IrlOptions, SamqConfig
from ..models.data import Dataset
from ..models.experiment import (
    METHOD_ORDER,
    BenchmarkRow,
    BenchmarkTable,
    DemoConfig,
    ExperimentConfig,
    MethodName,
)
from ..models.mdp import FloatArray, IntArray, LinearReward, ThetaVector
from ..models.reports import EstimationReport

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["method", "n_s", "mse_mean", "mse_std", "runtime_s", "n", "replications"]
TableFormat = Literal["csv", "markdown"]


@dataclass
class CellOutcome:
    """One replication of one (method, n_s) cell."""

    method: MethodName
    n_s: int | None
    squared_error: float | None = None
    runtime_s: float = 0.0
    eps_dis: float | None = None
    c_uni: float | None = None
    init_spread: float = 0.0
    error: str | None = None


def _best_of_inits(
    estimate: Callable[[ThetaVector], EstimationReport],
    inits: list[list[float]],
) -> tuple[ThetaVector, float, float]:
    """Run every start, keep the best likelihood; also return runtime and spread."""
    reports = [estimate(ThetaVector.of(*init)) for init in inits]
    best = max(reports, key=lambda r: r.log_likelihood)
    spread = max(
        (float(np.linalg.norm(np.subtract(a.theta_hat, b.theta_hat)))
         for a, b in combinations(reports, 2)),
        default=0.0,
    )
    return best.theta, sum(r.runtime_s for r in reports), spread


def _aggregated_cell(
    method: MethodName,
    n_s: int,
    dataset: Dataset,
    aggregation: Aggregation,
    eps_dis: float | None,
    reward: LinearReward,
    theta_star: ThetaVector,
    config: ExperimentConfig,
) -> CellOutcome:
    theta, runtime, spread = _best_of_inits(
        lambda init: nfmle_estimate(
            dataset, aggregation, init, config.nfmle, reward=reward
        ),
        config.theta_inits,
    )
    return CellOutcome(
        method=method,
        n_s=n_s,
        squared_error=theta.squared_distance(theta_star),
        runtime_s=runtime,
        eps_dis=eps_dis,
        c_uni=empirical_coverage(dataset, aggregation),
        init_spread=spread,
    )


def _replicate(config: ExperimentConfig, rep: int, seed: np.random.SeedSequence) -> list[CellOutcome]:
    """All (method, n_s) cells of one replication; failures become annotated outcomes."""
    sim_seed, cluster_seed = (int(v) % 2**31 for v in seed.generate_state(2))
    mdp, dataset = simulate_bus(config.env, config.n, sim_seed)
    theta_star = ThetaVector.of(*config.env.theta_true)
    outcomes: list[CellOutcome] = []

    def attempt(method: MethodName, n_s: int | None, run: Callable[[], CellOutcome]) -> None:
        try:
            outcomes.append(run())
        except SamqError as e:
            logger.warning(f"Replication {rep}: {method} n_s={n_s} failed: {e}")
            outcomes.append(CellOutcome(method=method, n_s=n_s, error=f"{type(e).__name__}: {e}"))

    if "SAmQ" in config.methods:
        try:
            q_hat = estimate_q(
                dataset,
                mdp.gamma,
                IrlOptions(
                    bins=config.irl_bins,
                    smoothing=config.smoothing,
                    anchor_action=config.anchor_action,
                ),
            ).q
        except SamqError as e:
            logger.warning(f"Replication {rep}: Q estimation failed: {e}")
            outcomes.extend(
                CellOutcome(method="SAmQ", n_s=n_s, error=f"{type(e).__name__}: {e}")
                for n_s in config.n_s_list
            )
        else:
            for n_s in config.n_s_list:

                def samq(n_s: int = n_s) -> CellOutcome:
                    aggregation = cluster_states(
                        q_hat, None, n_s, seed=cluster_seed,
                        restarts=config.kmeans_restarts,
                    )
                    return _aggregated_cell(
                        "SAmQ", n_s, dataset, aggregation,
                        aggregation_q_error(q_hat, aggregation),
                        mdp.reward, theta_star, config,
                    )

                attempt("SAmQ", n_s, samq)

    if "NF-MLE-SA" in config.methods:
        support = dataset.support()
        for n_s in config.n_s_list:

            def adhoc(n_s: int = n_s) -> CellOutcome:
                aggregation = ad_hoc_aggregation(support, n_s)
                return _aggregated_cell(
                    "NF-MLE-SA", n_s, dataset, aggregation, None,
                    mdp.reward, theta_star, config,
                )

            attempt("NF-MLE-SA", n_s, adhoc)

    if "NF-MLE" in config.methods:

        def exact() -> CellOutcome:
            theta, runtime, spread = _best_of_inits(
                lambda init: exact_nfmle(dataset, mdp, init, config.nfmle),
                config.theta_inits,
            )
            return CellOutcome(
                method="NF-MLE",
                n_s=None,
                squared_error=theta.squared_distance(theta_star),
                runtime_s=runtime,
                init_spread=spread,
            )

        attempt("NF-MLE", None, exact)

    logger.debug(f"Replication {rep} finished ({len(outcomes)} cells)")
    return outcomes


def _summarize(
    method: MethodName, n_s: int | None, cells: list[CellOutcome], n: int
) -> BenchmarkRow:
    ok = [c for c in cells if c.error is None]
    if not ok:
        raise ExperimentError(
            f"All {len(cells)} replications of {method} (n_s={n_s}) failed: {cells[0].error}"
        )
    errors = np.array([c.squared_error for c in ok], dtype=np.float64)
    eps = [c.eps_dis for c in ok if c.eps_dis is not None]
    cov = [c.c_uni for c in ok if c.c_uni is not None]
    return BenchmarkRow(
        method=method,
        n_s=n_s,
        mse_mean=float(errors.mean()),
        mse_std=float(errors.std()),
        runtime_s=float(np.median([c.runtime_s for c in ok])),
        n=n,
        replications=len(ok),
        failures=len(cells) - len(ok),
        notes=[c.error for c in cells if c.error is not None],
        eps_dis_mean=float(np.mean(eps)) if eps else None,
        c_uni_mean=float(np.mean(cov)) if cov else None,
        init_sensitivity=float(np.mean([c.init_spread for c in ok])),
    )


def run_experiment(config: ExperimentConfig) -> BenchmarkTable:
    """Run every replication of the sweep and summarize squared errors per cell.

    Replications run in a joblib pool of ``config.workers`` (falling back to
    ``SAMQ_WORKERS``); results are assembled in replication order, so the
    table does not depend on the worker count.

    Raises:
        ExperimentError: Every replication of some cell failed.
    """
    workers = config.workers or SamqConfig.from_env().workers
    seeds = np.random.SeedSequence(config.seed).spawn(config.replications)
    logger.info(
        f"Running {config.replications} replications of {config.methods} "
        f"over n_s={config.n_s_list} with {workers} worker(s)"
    )
    start = time.perf_counter()
    results = Parallel(n_jobs=workers)(
        delayed(_replicate)(config, rep, seed) for rep, seed in enumerate(seeds)
    )

    cells: dict[tuple[str, int | None], list[CellOutcome]] = defaultdict(list)
    for outcomes in results:
        for outcome in outcomes:
            cells[(outcome.method, outcome.n_s)].append(outcome)

    rows: list[BenchmarkRow] = []
    for method in METHOD_ORDER:
        if method not in config.methods:
            continue
        for n_s in [None] if method == "NF-MLE" else config.n_s_list:
            rows.append(_summarize(method, n_s, cells[(method, n_s)], config.n))

    table = BenchmarkTable(
        rows=rows, n_s_values=list(config.n_s_list), config_digest=config.digest()
    )
    logger.info(f"Benchmark finished in {time.perf_counter() - start:.1f}s")
    if config.output_dir is not None:
        _write_outputs(table, config, config.output_dir)
    return table


def _write_outputs(table: BenchmarkTable, config: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    export_table(table, "csv", out / "table.csv")
    export_table(table, "markdown", out / "table.md")
    (out / "table.json").write_text(table.model_dump_json(indent=2), encoding="utf-8")
    (out / "config.json").write_text(config.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Wrote benchmark outputs to {out}")


def _table_frame(table: BenchmarkTable) -> pd.DataFrame:
    if not table.rows:
        raise InvalidArgumentError("Cannot export an empty benchmark table")
    records = []
    for row in table.rows:
        spans = [row.n_s] if row.n_s is not None else (table.n_s_values or [None])
        for n_s in spans:
            records.append(
                {
                    "method": row.method,
                    "n_s": n_s,
                    "mse_mean": row.mse_mean,
                    "mse_std": row.mse_std,
                    "runtime_s": row.runtime_s,
                    "n": row.n,
                    "replications": row.replications,
                }
            )
    frame = pd.DataFrame.from_records(records, columns=TABLE_COLUMNS)
    frame["n_s"] = frame["n_s"].astype("Int64")
    return frame


def _sig6(value: object) -> str:
    if value is None or pd.isna(value):
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def format_markdown(table: BenchmarkTable) -> str:
    """Markdown rendering of the exported rows at 6 significant digits."""
    frame = _table_frame(table)
    lines = [
        "| " + " | ".join(TABLE_COLUMNS) + " |",
        "|" + "|".join("---" for _ in TABLE_COLUMNS) + "|",
    ]
    for record in frame.to_dict("records"):
        cells = (_sig6(record[column]) for column in TABLE_COLUMNS)
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def export_table(table: BenchmarkTable, fmt: TableFormat, path: Path) -> Path:
    """Write the table as CSV (full precision) or markdown (6 significant digits).

    The NF-MLE row is repeated under every n_s of the sweep.
    """
    frame = _table_frame(table)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        frame.to_csv(path, index=False, float_format="%.17g")
    elif fmt == "markdown":
        path.write_text(format_markdown(table), encoding="utf-8")
    else:
        raise InvalidArgumentError(f"Unknown table format: {fmt}")
    return path


def read_table_csv(path: Path) -> BenchmarkTable:
    """Inverse of ``export_table(..., "csv")``; repeated NF-MLE rows collapse to one."""
    frame = pd.read_csv(path, float_precision="round_trip", dtype={"n_s": "Int64"})
    missing = set(TABLE_COLUMNS) - set(frame.columns)
    if missing:
        raise InvalidArgumentError(f"{path} is missing columns {sorted(missing)}")
    rows: list[BenchmarkRow] = []
    n_s_values: list[int] = []
    seen_exact = False
    for record in frame.to_dict("records"):
        n_s = None if pd.isna(record["n_s"]) else int(record["n_s"])
        if n_s is not None and n_s not in n_s_values:
            n_s_values.append(n_s)
        if record["method"] == "NF-MLE":
            if seen_exact:
                continue
            seen_exact = True
            n_s = None
        rows.append(
            BenchmarkRow(
                method=record["method"],
                n_s=n_s,
                mse_mean=float(record["mse_mean"]),
                mse_std=float(record["mse_std"]),
                runtime_s=float(record["runtime_s"]),
                n=int(record["n"]),
                replications=int(record["replications"]),
            )
        )
    return BenchmarkTable(rows=rows, n_s_values=n_s_values)


def column_purity(coordinates: FloatArray, labels: IntArray) -> float:
    """Share of state pairs with equal true coordinate that also share a cluster."""
    coords = np.asarray(coordinates, dtype=np.float64)
    labels = np.asarray(labels)
    same_cluster = total = 0
    for value in np.unique(coords):
        members = labels[coords == value]
        k = len(members)
        total += k * (k - 1) // 2
        _, counts = np.unique(members, return_counts=True)
        same_cluster += int(np.sum(counts * (counts - 1) // 2))
    return 1.0 if total == 0 else same_cluster / total


@dataclass
class DemoResult:
    """Cluster memberships of the SAmQ and ad-hoc aggregations on a dummy-padded env."""

    frame: pd.DataFrame
    samq_purity: float
    adhoc_purity: float
    samq: Aggregation
    adhoc: Aggregation
    notes: list[str] = field(default_factory=list)


def run_dummy_state_demo(config: DemoConfig) -> DemoResult:
    """Aggregate a dummy-padded bus env both ways and score column purity."""
    mdp, dataset = simulate_bus(config.env, config.n, config.seed)
    estimate = estimate_q(
        dataset,
        mdp.gamma,
        IrlOptions(anchor_action=config.anchor_action, smoothing=config.smoothing),
    )
    support = estimate.q.index
    samq = cluster_states(
        estimate.q, support, config.n_s, seed=config.seed, restarts=config.kmeans_restarts
    )
    adhoc = ad_hoc_aggregation(support, config.n_s)

    points = support.points
    frame = pd.DataFrame({"mileage": points[:, 0]})
    for k in range(1, points.shape[1]):
        frame[f"dummy_{k - 1}"] = points[:, k]
    frame["samq_cluster"] = samq.labels
    frame["adhoc_cluster"] = adhoc.labels

    result = DemoResult(
        frame=frame,
        samq_purity=column_purity(points[:, 0], samq.labels),
        adhoc_purity=column_purity(points[:, 0], adhoc.labels),
        samq=samq,
        adhoc=adhoc,
    )
    if len(support) < mdp.n_states:
        result.notes.append(f"{mdp.n_states - len(support)} states never observed")
    logger.info(
        f"Column purity: SAmQ {result.samq_purity:.3f}, ad-hoc {result.adhoc_purity:.3f}"
    )
    if config.output is not None:
        config.output.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(config.output, index=False, float_format="%.17g")
    return result
