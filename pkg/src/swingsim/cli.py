"""Command line interface.

Exit codes: 0 all checks pass, 2 validation error, 3 check failure,
4 numerical divergence.
"""
import logging
import sys

import click

from . import kernels
from .errors import SwingSimError
from .runner import EXIT_ASSERTION, EXIT_OK, batch, exit_code_for, reproduce_paper, run
from .sharing import optimal_sharing


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(exit_code_for(exc))


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.version_option(package_name="artifact")
def main(verbose):
    """Master-slave microgrid simulator."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger(__name__).info("kernel backend: %s", kernels.BACKEND)


@main.command("run")
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for trajectory.csv and the report.")
def run_cmd(scenario, out_dir):
    """Simulate one scenario file."""
    try:
        report = run(scenario, out_dir)
    except SwingSimError as exc:
        _fail(exc)
    click.echo(report.to_text(), nl=False)
    sys.exit(EXIT_OK if report.passed else EXIT_ASSERTION)


@main.command("batch")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_root", default=None, type=click.Path(file_okay=False),
              help="Root for per-scenario output folders (default DIRECTORY/out).")
@click.option("-j", "--jobs", default=1, show_default=True, help="Parallel worker processes.")
def batch_cmd(directory, out_root, jobs):
    """Run every *.json scenario in DIRECTORY."""
    results = batch(directory, out_root, jobs)
    if not results:
        click.echo("no scenario files found", err=True)
    worst = EXIT_OK
    for path, code, msg in results:
        status = "ok" if code == EXIT_OK else f"exit {code}"
        click.echo(f"{status:<8} {path}" + (f": {msg}" if msg else ""))
        worst = max(worst, code)
    sys.exit(worst)


def _floats(text):
    return [float(x) for x in text.replace(" ", "").split(",") if x]


@main.command("reproduce-paper")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@click.option("--beta", type=float, default=None, help="Override the inverter integral gain.")
@click.option("--xi", default=None, help="Override the sharing vector, e.g. 0.5,0.5")
def reproduce_cmd(out_dir, beta, xi):
    """Re-run the two-inverter load-step experiment and check its claims."""
    try:
        report = reproduce_paper(out_dir, beta=beta, xi=_floats(xi) if xi else None,
                                 raise_on_failure=False)
    except SwingSimError as exc:
        _fail(exc)
    click.echo(report.to_text(), nl=False)
    sys.exit(EXIT_OK if report.passed else EXIT_ASSERTION)


@main.command("optimal-xi")
@click.option("--costs", required=True, help="Comma-separated diagonal cost coefficients.")
def optimal_xi_cmd(costs):
    """Print the cost-optimal sharing vector."""
    try:
        xi = optimal_sharing(_floats(costs))
    except (SwingSimError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(" ".join(f"{x:.17g}" for x in xi))


if __name__ == "__main__":
    main()
