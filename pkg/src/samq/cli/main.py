"""Command-line interface for SAmQ structural estimation."""

from __future__ import annotations

import functools
import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import click
from pydantic import BaseModel, ValidationError

from .._version import __version__
from ..core.clustering import ad_hoc_aggregation, cluster_states
from ..core.irl import estimate_q, load_q_function
from ..core.nfmle import exact_nfmle, nfmle_estimate
from ..envs.bus import make_bus_env
from ..envs.simulation import simulate_bus
from ..evaluation.benchmark import format_markdown, run_dummy_state_demo, run_experiment
from ..evaluation.bounds import build_bound_report, format_bound_table
from ..exceptions import InvalidArgumentError
from ..models.aggregation import Aggregation
from ..models.config import BusEnvConfig, SamqConfig
from ..models.data import Dataset
from ..models.experiment import DemoConfig, ExperimentConfig
from ..models.mdp import MdpSpec, ThetaVector
from ..models.metrics import SolverMetrics
from ..models.reports import EstimationReport
from ..utils.io import load_dataset, save_dataset
from ..utils.logging_config import configure_logging

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])
M = TypeVar("M", bound=BaseModel)

EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_PATH = click.Path(path_type=Path)


def handle_errors(command: F) -> F:
    """Print ``Error: ...`` and exit 1 on any failure (traceback with --verbose)."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        ctx = click.get_current_context()
        verbose = bool(ctx.obj and ctx.obj.get("verbose"))
        quiet = bool(ctx.obj and ctx.obj.get("quiet"))
        try:
            return command(*args, **kwargs)
        except click.ClickException:
            raise
        except KeyboardInterrupt:
            if not quiet:
                click.echo("\nOperation cancelled by user", err=True)
            sys.exit(1)
        except Exception as e:
            click.echo(f"Error: {e}", err=True)
            if verbose:
                import traceback

                traceback.print_exc()
            sys.exit(1)

    return wrapper  # type: ignore[return-value]


def _settings(ctx: click.Context, **overrides: Any) -> SamqConfig:
    """Environment configuration with non-None CLI overrides applied."""
    base: SamqConfig = ctx.obj["config"]
    update = {k: v for k, v in overrides.items() if v is not None}
    return base.model_copy(update=update) if update else base


def _load_model(model: type[M], path: Path | None) -> M:
    if path is None:
        return model()
    try:
        return model.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise InvalidArgumentError(f"Invalid {model.__name__} in {path}: {e}") from e


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got '{text}'") from e


def _resolve_mdp(dataset: Dataset, mdp_path: Path | None) -> MdpSpec:
    """MDP from --mdp, else rebuilt from the environment recorded in the dataset."""
    if mdp_path is not None:
        mdp = MdpSpec.load(mdp_path)
    elif dataset.meta.env is not None:
        mdp = make_bus_env(BusEnvConfig.model_validate(dataset.meta.env))
    else:
        raise InvalidArgumentError(
            "The dataset records no environment; pass --mdp with the MDP document"
        )
    if dataset.meta.env_digest and dataset.meta.env_digest != mdp.digest():
        logger.warning("MDP digest differs from the one recorded with the dataset")
    return mdp


def _check_gamma(dataset: Dataset, gamma: float | None) -> float:
    if gamma is not None and abs(gamma - dataset.gamma) > 1e-12:
        raise InvalidArgumentError(
            f"--gamma {gamma} is inconsistent with dataset gamma {dataset.gamma}"
        )
    return dataset.gamma


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.option("--quiet", "-q", is_flag=True, help="Suppress all output except results")
@click.option(
    "--log",
    type=OUTPUT_PATH,
    help="Write logs to specified file instead of stderr",
)
@click.version_option(version=__version__, prog_name="samq")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, quiet: bool, log: Path | None) -> None:
    """SAmQ - structural estimation with Q-based state aggregation.

    Typical pipeline:

        samq simulate --n 10000 --out data/d.csv

        samq estimate-q --data data/d.csv --anchor 1 --out data/q.csv

        samq aggregate --data data/d.csv --q data/q.csv --n-s 10 --out data/a.json

        samq estimate --data data/d.csv --aggregation data/a.json --theta-init 0.05,1.0 --out report.json

        samq diagnose --data data/d.csv --q data/q.csv --aggregation data/a.json --report report.json
    """
    config = SamqConfig.from_env()
    configure_logging(verbose=verbose, quiet=quiet, log_file=log or config.log_file)
    ctx.ensure_object(dict)
    ctx.obj.update(verbose=verbose, quiet=quiet, config=config)


@cli.command()
@click.option("--config", "config_path", type=EXISTING_FILE, help="BusEnvConfig JSON")
@click.option("--n", "n", type=int, default=10000, show_default=True, help="Transitions")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid-size", type=int, help="Mileage grid size (overrides config)")
@click.option("--gamma", type=float, help="Discount factor (overrides config)")
@click.option("--dummy-dims", type=int, help="Number of dummy state dimensions")
@click.option("--out", type=OUTPUT_PATH, required=True, help="Dataset CSV path")
@click.option("--mdp-out", type=OUTPUT_PATH, help="Also write the MDP JSON document")
@click.pass_context
@handle_errors
def simulate(
    ctx: click.Context,
    config_path: Path | None,
    n: int,
    seed: int,
    grid_size: int | None,
    gamma: float | None,
    dummy_dims: int | None,
    out: Path,
    mdp_out: Path | None,
) -> None:
    """Simulate bus engine replacement data under the true parameters."""
    env = _load_model(BusEnvConfig, config_path)
    update = {
        k: v
        for k, v in {
            "mileage_grid_size": grid_size,
            "gamma": gamma,
            "dummy_dims": dummy_dims,
        }.items()
        if v is not None
    }
    if update:
        env = BusEnvConfig.model_validate({**env.model_dump(), **update})
    mdp, dataset = simulate_bus(env, n, seed)
    save_dataset(dataset, out)
    if mdp_out is not None:
        mdp.save(mdp_out)
    if not ctx.obj["quiet"]:
        click.echo(f"Wrote {dataset.n} transitions ({mdp.n_states} states) to {out}")


@cli.command("estimate-q")
@click.option("--data", type=EXISTING_FILE, required=True, help="Dataset CSV")
@click.option("--gamma", type=float, help="Discount factor (must match the dataset)")
@click.option("--anchor", type=int, help="Anchor action index")
@click.option("--smoothing", type=float, help="Laplace smoothing of choice frequencies")
@click.option("--bins", type=int, help="Bins per state dimension (default: one per state)")
@click.option("--out", type=OUTPUT_PATH, required=True, help="Q estimate CSV path")
@click.pass_context
@handle_errors
def estimate_q_command(
    ctx: click.Context,
    data: Path,
    gamma: float | None,
    anchor: int | None,
    smoothing: float | None,
    bins: int | None,
    out: Path,
) -> None:
    """Estimate the Q-function from choice data."""
    settings = _settings(ctx, anchor_action=anchor, smoothing=smoothing, irl_bins=bins)
    dataset = load_dataset(data)
    estimate = estimate_q(dataset, _check_gamma(dataset, gamma), settings.irl_options())
    estimate.save(out)
    if not ctx.obj["quiet"]:
        click.echo(
            f"Wrote Q estimate for {estimate.q.n_states} states to {out} "
            f"(residual {estimate.fit_residual:.2e})"
        )


@cli.command()
@click.option("--data", type=EXISTING_FILE, required=True, help="Dataset CSV")
@click.option("--q", "q_path", type=EXISTING_FILE, help="Q estimate CSV (samq method)")
@click.option("--n-s", "n_s", type=int, required=True, help="Number of aggregated states")
@click.option(
    "--method",
    type=click.Choice(["samq", "ad-hoc"], case_sensitive=False),
    default="samq",
    show_default=True,
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--restarts", type=int, help="K-means restarts")
@click.option("--out", type=OUTPUT_PATH, required=True, help="Aggregation JSON path")
@click.pass_context
@handle_errors
def aggregate(
    ctx: click.Context,
    data: Path,
    q_path: Path | None,
    n_s: int,
    method: str,
    seed: int,
    restarts: int | None,
    out: Path,
) -> None:
    """Aggregate states by Q-vector clustering or by raw-value quantiles."""
    settings = _settings(ctx, kmeans_restarts=restarts)
    dataset = load_dataset(data)
    aggregation: Aggregation
    if method.lower() == "samq":
        if q_path is None:
            raise click.UsageError("--q is required for --method samq")
        q = load_q_function(q_path)
        unseen = sum(not q.index.contains(p) for p in dataset.support().points)
        if unseen:
            raise InvalidArgumentError(f"{unseen} dataset states have no row in {q_path}")
        aggregation = cluster_states(
            q, None, n_s, seed=seed, restarts=settings.kmeans_restarts
        )
    else:
        aggregation = ad_hoc_aggregation(dataset.support(), n_s)
    aggregation.save(out)
    if not ctx.obj["quiet"]:
        click.echo(f"Wrote {method} aggregation with {aggregation.n_s} clusters to {out}")


@cli.command()
@click.option("--data", type=EXISTING_FILE, required=True, help="Dataset CSV")
@click.option("--aggregation", "aggregation_path", type=EXISTING_FILE, help="Aggregation JSON")
@click.option(
    "--method",
    type=click.Choice(["aggregated", "exact"], case_sensitive=False),
    default="aggregated",
    show_default=True,
)
@click.option("--gamma", type=float, help="Discount factor (must match the dataset)")
@click.option("--theta-init", required=True, help="Comma-separated starting parameters")
@click.option("--mdp", "mdp_path", type=EXISTING_FILE, help="MDP JSON (reward family)")
@click.option(
    "--optimizer",
    type=click.Choice(["nelder-mead", "gradient"], case_sensitive=False),
    help="Outer optimizer",
)
@click.option("--min-cell-count", type=int, help="Minimum transitions per cell")
@click.option("--stats", is_flag=True, help="Show solver statistics at the end")
@click.option("--out", type=OUTPUT_PATH, required=True, help="Estimation report JSON")
@click.pass_context
@handle_errors
def estimate(
    ctx: click.Context,
    data: Path,
    aggregation_path: Path | None,
    method: str,
    gamma: float | None,
    theta_init: str,
    mdp_path: Path | None,
    optimizer: str | None,
    min_cell_count: int | None,
    stats: bool,
    out: Path,
) -> None:
    """Maximize the (aggregated) nested fixed-point likelihood."""
    settings = _settings(
        ctx,
        optimizer=optimizer.lower() if optimizer else None,
        min_cell_count=min_cell_count,
    )
    dataset = load_dataset(data)
    _check_gamma(dataset, gamma)
    mdp = _resolve_mdp(dataset, mdp_path)
    init = ThetaVector.of(*_parse_floats(theta_init))
    metrics = SolverMetrics()

    if method.lower() == "exact":
        report = exact_nfmle(dataset, mdp, init, settings.nfmle_options(), metrics=metrics)
    else:
        if aggregation_path is None:
            raise click.UsageError("--aggregation is required for --method aggregated")
        aggregation = Aggregation.load(aggregation_path)
        report = nfmle_estimate(
            dataset,
            aggregation,
            init,
            settings.nfmle_options(),
            reward=mdp.reward,
            metrics=metrics,
        )
    report.save(out)

    if not ctx.obj["quiet"]:
        theta = ", ".join(f"{v:.6g}" for v in report.theta_hat)
        status = "converged" if report.converged else f"not converged: {report.message}"
        click.echo(f"theta_hat = ({theta}), log-likelihood {report.log_likelihood:.6f} ({status})")
    if stats:
        click.echo("\n" + metrics.format_stats_table(), err=True)


@cli.command()
@click.option("--data", type=EXISTING_FILE, required=True, help="Dataset CSV")
@click.option("--q", "q_path", type=EXISTING_FILE, required=True, help="Q estimate CSV")
@click.option("--aggregation", "aggregation_path", type=EXISTING_FILE, required=True)
@click.option("--report", "report_path", type=EXISTING_FILE, required=True, help="Estimation report JSON")
@click.option("--mdp", "mdp_path", type=EXISTING_FILE, help="MDP JSON")
@click.option("--theta-star", help="True parameters (default: recorded with the dataset)")
@click.option("--delta", type=float, default=0.05, show_default=True)
@click.option("--theta-card", type=float, help="|Theta| covering-number proxy")
@click.option("--out", type=OUTPUT_PATH, help="Bound report JSON path")
@click.pass_context
@handle_errors
def diagnose(
    ctx: click.Context,
    data: Path,
    q_path: Path,
    aggregation_path: Path,
    report_path: Path,
    mdp_path: Path | None,
    theta_star: str | None,
    delta: float,
    theta_card: float | None,
    out: Path | None,
) -> None:
    """Measure bound constants and check the inequalities for one estimate."""
    settings = _settings(ctx)
    dataset = load_dataset(data)
    mdp = _resolve_mdp(dataset, mdp_path)
    star = _parse_floats(theta_star) if theta_star else dataset.meta.theta_true
    report = build_bound_report(
        dataset,
        mdp,
        load_q_function(q_path),
        Aggregation.load(aggregation_path),
        EstimationReport.load(report_path),
        star,
        delta=delta,
        theta_card=theta_card,
        h=settings.fd_step,
    )
    if out is not None:
        report.save(out)
    if not ctx.obj["quiet"]:
        click.echo(format_bound_table(report))


@cli.command()
@click.option("--config", "config_path", type=EXISTING_FILE, help="ExperimentConfig JSON")
@click.option("--out", type=OUTPUT_PATH, help="Output directory (overrides config)")
@click.option("--workers", type=int, help="Parallel workers (default: SAMQ_WORKERS)")
@click.pass_context
@handle_errors
def benchmark(
    ctx: click.Context, config_path: Path | None, out: Path | None, workers: int | None
) -> None:
    """Run the method comparison sweep and write its tables."""
    config = _load_model(ExperimentConfig, config_path)
    update: dict[str, Any] = {}
    if out is not None:
        update["output_dir"] = out
    if workers is not None:
        update["workers"] = workers
    if update:
        config = config.model_copy(update=update)
    table = run_experiment(config)
    if not ctx.obj["quiet"]:
        click.echo(format_markdown(table))


@cli.command("dummy-demo")
@click.option("--config", "config_path", type=EXISTING_FILE, help="DemoConfig JSON")
@click.option("--n", "n", type=int, help="Transitions (overrides config)")
@click.option("--n-s", "n_s", type=int, help="Aggregated states (overrides config)")
@click.option("--seed", type=int, help="Seed (overrides config)")
@click.option("--out", type=OUTPUT_PATH, help="Membership CSV path")
@click.pass_context
@handle_errors
def dummy_demo(
    ctx: click.Context,
    config_path: Path | None,
    n: int | None,
    n_s: int | None,
    seed: int | None,
    out: Path | None,
) -> None:
    """Compare SAmQ and raw-value aggregation on a dummy-padded environment."""
    config = _load_model(DemoConfig, config_path)
    update = {k: v for k, v in {"n": n, "n_s": n_s, "seed": seed, "output": out}.items() if v is not None}
    if update:
        config = DemoConfig.model_validate({**config.model_dump(), **update})
    result = run_dummy_state_demo(config)
    if not ctx.obj["quiet"]:
        click.echo(f"SAmQ column purity:   {result.samq_purity:.4f}")
        click.echo(f"Ad-hoc column purity: {result.adhoc_purity:.4f}")
        for note in result.notes:
            click.echo(f"Note: {note}")
