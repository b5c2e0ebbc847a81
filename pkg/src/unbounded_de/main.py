#!/usr/bin/env python
import logging
from contextlib import contextmanager
from typing import List, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .analysis import ecdf_table, lineage_table, problem_targets, suite_ecdf, wilcoxon_table
from .errors import ConfigError, ResultMismatch
from .harness import export_tables, failed_individual_suite, load_results, robustness_suite, run_experiment
from .models import EngineName
from .settings import load_plan, log_level, output_dir

app = typer.Typer(help="Unbounded differential evolution experiments.", no_args_is_help=True)
console = Console()
logger = logging.getLogger("unbounded_de")

ConfigOption = typer.Option(None, "--config", help="YAML experiment plan (packaged default when omitted)")
TrialsOption = typer.Option(None, "--trials", min=1, help="Trials per (algorithm, problem) cell")
WorkersOption = typer.Option(None, "--workers", min=1, help="Worker processes")
OutOption = typer.Option(None, "--out", help="Output directory")
SeedOption = typer.Option(None, "--seed", min=0, help="Base seed")
EngineOption = typer.Option(None, "--engine", help="Run only this engine")
BudgetOption = typer.Option(None, "--budget", min=1, help="Evaluation budget for every problem")
LogLevelOption = typer.Option(None, "--log-level", help="Logging level (default UDE_LOG_LEVEL or INFO)")


def configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=(level or log_level()).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True)],
        force=True,
    )


@contextmanager
def exit_codes():
    """Map domain errors onto the documented exit codes."""
    try:
        yield
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        raise typer.Exit(code=2) from e
    except ResultMismatch as e:
        logger.error("Result mismatch: %s", e)
        raise typer.Exit(code=3) from e


def _plan(config, trials=None, workers=None, out=None, seed=None, engine=None, budget=None):
    return load_plan(
        config,
        trials=trials,
        workers=workers,
        output_dir=out,
        base_seed=seed,
        engine=engine.value if engine else None,
        budget=budget,
    )


@app.command()
def run(
    config: Optional[str] = ConfigOption,
    trials: Optional[int] = TrialsOption,
    workers: Optional[int] = WorkersOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
    engine: Optional[EngineName] = EngineOption,
    budget: Optional[int] = BudgetOption,
    log_level_: Optional[str] = LogLevelOption,
):
    """Execute every missing trial of a plan."""
    configure_logging(log_level_)
    with exit_codes():
        plan = _plan(config, trials, workers, out, seed, engine, budget)
        out_dir = run_experiment(plan)
    console.print(f"Results in [bold]{out_dir}[/bold] (plan {plan.plan_hash()[:12]})")


@app.command()
def analyze(
    out: Optional[str] = OutOption,
    at: List[float] = typer.Option([], "--at", help="Extra comparison points as budget fractions, repeatable"),
    points: int = typer.Option(200, "--points", min=1, help="ECDF grid points per problem"),
    alpha: float = typer.Option(0.05, "--alpha", help="Significance level"),
    log_level_: Optional[str] = LogLevelOption,
):
    """Write ecdf.csv, ecdf_suite.csv, wilcoxon.csv and lineage.csv from stored results."""
    configure_logging(log_level_)
    out = out or output_dir()
    with exit_codes():
        matrix = load_results(out)
    for fraction in at:
        if not 0 < fraction <= 1:
            logger.error("--at takes fractions in (0, 1], got %s", fraction)
            raise typer.Exit(code=2)
    ecdf = ecdf_table(matrix, points)
    written = export_tables(
        {
            "ecdf": ecdf,
            "ecdf_suite": suite_ecdf(ecdf, points),
            "wilcoxon": wilcoxon_table(matrix, [None, *at], alpha),
            "lineage": lineage_table(matrix),
        },
        out,
    )
    for path in written:
        logger.info("Wrote %s", path)


@app.command()
def targets(out: Optional[str] = OutOption, log_level_: Optional[str] = LogLevelOption):
    """Print the ECDF targets of every problem."""
    configure_logging(log_level_)
    with exit_codes():
        matrix = load_results(out or output_dir())
    table = Table(title="ECDF targets (linear quantiles of pooled finals)")
    for column in ("problem", "q1", "median", "q3"):
        table.add_column(column)
    for problem, target in problem_targets(matrix).items():
        table.add_row(problem, *(f"{value:.6g}" for value in target.as_list()))
    console.print(table)


def _suite(name: str, suite, config, trials, workers, out, seed, budget, log_level_) -> None:
    configure_logging(log_level_)
    with exit_codes():
        plan = _plan(config, trials, workers, out, seed, None, budget)
        frame = suite(plan)
    path = export_tables({name: frame}, plan.harness.output_dir)[0]
    table = Table(title=name)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.itertuples(index=False):
        table.add_row(*(f"{v:.4g}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)
    logger.info("Wrote %s", path)


@app.command()
def robustness(
    config: Optional[str] = ConfigOption,
    trials: Optional[int] = TrialsOption,
    workers: Optional[int] = WorkersOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
    budget: Optional[int] = BudgetOption,
    log_level_: Optional[str] = LogLevelOption,
):
    """Budget-robustness suite: LSHADE schedules against USHADE(DPT)."""
    _suite("robustness", robustness_suite, config, trials, workers, out, seed, budget, log_level_)


@app.command()
def failed(
    config: Optional[str] = ConfigOption,
    trials: Optional[int] = TrialsOption,
    workers: Optional[int] = WorkersOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
    budget: Optional[int] = BudgetOption,
    log_level_: Optional[str] = LogLevelOption,
):
    """Keep-failed versus discard-failed comparison."""
    _suite("failed", failed_individual_suite, config, trials, workers, out, seed, budget, log_level_)


if __name__ == "__main__":
    app()
