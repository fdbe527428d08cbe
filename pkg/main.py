#!/usr/bin/env python3
"""
cot-lab
Command-line entry point for the transport duality lab
"""

import asyncio
import functools
import logging
import sys
from typing import Optional

import click

from src.config import settings
from src.models import ProblemFile
from src.pipeline import LabPipeline, RunResult
from src.runners import RunOptions

STATUS = {0: "✅", 1: "❌", 2: "🚫", 3: "⚠️ ", 4: "📄", 5: "💥"}


def common_options(func):
    @click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Problem file (JSON)")
    @click.option("--output", "output", type=click.Path(dir_okay=False), help="Write the report here instead of stdout")
    @click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Tabular rows for plotting")
    @click.option("--tolerance", type=float, default=None, help="Residual tolerance (default 1e-9)")
    @click.option("--seed", type=int, default=0, show_default=True, help="Seed for random suites")
    @click.option("--solver", type=click.Choice(["simplex", "highs"]), default=None, help="LP backend")
    @click.option("--quiet", is_flag=True, help="Only warnings on stderr, no progress bars")
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)
    return wrapper


def _setup(quiet: bool, tolerance: Optional[float], seed: int, solver: Optional[str]) -> LabPipeline:
    level = logging.WARNING if quiet else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr, force=True,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if quiet:
        settings.progress = False
    tol = settings.tolerance if tolerance is None else tolerance
    return LabPipeline(RunOptions(tolerance=tol, solver=solver, seed=seed))


def _finish(pipeline: LabPipeline, result: RunResult, output: Optional[str], csv_path: Optional[str],
            quiet: bool) -> None:
    text = pipeline.emit(result, output, csv_path)
    if output is None:
        click.echo(text, nl=False)
    if not quiet:
        report = result.report
        icon = STATUS.get(result.exit_code, "❌")
        if result.exit_code == 0:
            click.echo(f"{icon} {report['command']} ({report['mode']}) finished", err=True)
        else:
            err = report.get("error") or {}
            click.echo(f"{icon} {report['command']} failed [{err.get('kind')}]: {err.get('message')}", err=True)
        if output:
            click.echo(f"📁 Report saved to: {output}", err=True)
        if csv_path and result.exit_code == 0:
            click.echo(f"📊 CSV rows saved to: {csv_path}", err=True)
    sys.exit(result.exit_code)


def _run_command(command: str, input_path, output, csv_path, tolerance, seed, solver, quiet,
                 problem: Optional[ProblemFile] = None, overrides: Optional[dict] = None) -> None:
    pipeline = _setup(quiet, tolerance, seed, solver)
    result = asyncio.run(pipeline.run(command, input_path, problem, overrides))
    _finish(pipeline, result, output, csv_path, quiet)


@click.group()
def cli():
    """Constrained and martingale transport duality lab."""


@cli.command()
@common_options
def solve(input_path, output, csv_path, tolerance, seed, solver, quiet):
    """Solve the primal and dual problems of the file's mode."""
    _run_command("solve", input_path, output, csv_path, tolerance, seed, solver, quiet)


@cli.command("check-order")
@common_options
@click.option("--random", "random_pairs", type=int, default=None,
              help="Cross-check potentials against the LP on N random 1D pairs")
def check_order(input_path, output, csv_path, tolerance, seed, solver, quiet, random_pairs):
    """Decide whether mu precedes nu in convex order."""
    if random_pairs is None:
        _run_command("check-order", input_path, output, csv_path, tolerance, seed, solver, quiet)
        return
    pipeline = _setup(quiet, tolerance, seed, solver)
    result = asyncio.run(pipeline.random_order_suite(random_pairs))
    _finish(pipeline, result, output, None, quiet)


@cli.command()
@common_options
def envelope(input_path, output, csv_path, tolerance, seed, solver, quiet):
    """Convexity check and convex envelope of a function on the Y axis."""
    _run_command("envelope", input_path, output, csv_path, tolerance, seed, solver, quiet)


@cli.command("polar-scan")
@common_options
@click.option("--full-scan", is_flag=True, help="Run the per-cell LP on every cell (martingale mode)")
def polar_scan(input_path, output, csv_path, tolerance, seed, solver, quiet, full_scan):
    """Find and certify the cells no admissible coupling charges."""
    overrides = {"full_scan": True} if full_scan else None
    _run_command("polar-scan", input_path, output, csv_path, tolerance, seed, solver, quiet, overrides=overrides)


@cli.command("gap-demo")
@common_options
@click.option("--n", "n", type=int, default=None, help="Grid size on [0, 1]")
@click.option("--shifts", type=str, default=None, help="Comma-separated shifts, e.g. 1,2,5")
@click.option("--hedge-norms", type=str, default=None, help="B_b,B_c,G, e.g. 10,10,10")
def gap_demo(input_path, output, csv_path, tolerance, seed, solver, quiet, n, shifts, hedge_norms):
    """Shortfall bounds along the shifted off-diagonal couplings."""
    params = {}
    if n is not None:
        params["n"] = n
    if shifts:
        params["shifts"] = [int(s) for s in shifts.split(",") if s.strip()]
    if hedge_norms:
        params["hedge_norms"] = [float(v) for v in hedge_norms.split(",") if v.strip()]
    problem = ProblemFile(mode="gap", parameters=params) if input_path is None else None
    _run_command("gap-demo", input_path, output, csv_path, tolerance, seed, solver, quiet, problem,
                 overrides=params if input_path and params else None)


@cli.command("normalize-dual")
@common_options
def normalize_dual(input_path, output, csv_path, tolerance, seed, solver, quiet):
    """Rewrite a dual decomposition with bounded parts."""
    _run_command("normalize-dual", input_path, output, csv_path, tolerance, seed, solver, quiet)


@cli.command("quotient-dist")
@common_options
def quotient_dist(input_path, output, csv_path, tolerance, seed, solver, quiet):
    """Distance of a payoff to the centred statics, computed from both sides."""
    _run_command("quotient-dist", input_path, output, csv_path, tolerance, seed, solver, quiet)


@cli.command()
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False), help="Report to check")
@common_options
def verify(report_path, input_path, output, csv_path, tolerance, seed, solver, quiet):
    """Independently re-check every residual and bound in a report."""
    pipeline = _setup(quiet, tolerance, seed, solver)
    if input_path is None:
        raise click.UsageError("verify needs --input with the problem file")
    result = pipeline.verify(report_path, input_path)
    _finish(pipeline, result, output, None, quiet)


if __name__ == "__main__":
    cli()
