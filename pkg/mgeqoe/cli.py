import logging
import math
import sys
from pathlib import Path
from typing import List, NoReturn, Optional, Sequence

import structlog
import typer

from mgeqoe import pipeline
from mgeqoe.constants import DEFAULT_ALPHA
from mgeqoe.core import BodyConstants, CanonicalUnits
from mgeqoe.exceptions import ConfigurationError, InputError, InvalidArgument, MgeqoeError
from mgeqoe.io import frame_to_csv_text, read_trajectory, read_units, write_outputs
from mgeqoe.propagation import compare_trajectories
from mgeqoe.scenario import load_scenario

app = typer.Typer(
    help="Cislunar propagation in Cartesian and M-GEqOE coordinates.",
    add_completion=False,
    no_args_is_help=True,
)

EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="%(message)s", force=True)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.format_exc_info,
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )


def _fail(error: Exception, run: Optional[pipeline.ScenarioRun] = None) -> NoReturn:
    if isinstance(error, InputError):
        typer.echo(f"error: {error}", err=True)
        raise typer.Exit(EXIT_INPUT_ERROR)
    if isinstance(error, MgeqoeError):
        typer.echo(f"numerical failure: {error}", err=True)
        epoch = pipeline.failure_epoch(error, run)
        if epoch is not None:
            typer.echo(f"failure epoch: {epoch[1]:.6f} days", err=True)
        raise typer.Exit(EXIT_NUMERICAL_ERROR)
    # unwritable output directory
    typer.echo(f"error: {error}", err=True)
    raise typer.Exit(EXIT_INPUT_ERROR)


def parse_epochs(value: Optional[str]) -> Optional[List[float]]:
    """Comma separated epochs in days.

    >>> parse_epochs("0, 1.5,3")
    [0.0, 1.5, 3.0]
    """
    if not value:
        return None
    try:
        return [float(item) for item in value.split(",")]
    except ValueError:
        raise InvalidArgument(f"epochs must be comma separated numbers, got {value!r}") from None


@app.command()
def propagate(
    scenario: str = typer.Argument(..., help="Scenario file, or name of a bundled scenario."),
    output: Path = typer.Option(..., "--output", "-o", help="Output directory."),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Propagate a scenario and export trajectories, frame views and elements."""
    configure_logging(verbose)
    run: Optional[pipeline.ScenarioRun] = None
    try:
        run = pipeline.prepare(load_scenario(scenario))
        result = pipeline.run_propagation(run)
        write_outputs(output, pipeline.propagation_outputs(run, result))
    except (MgeqoeError, OSError) as e:
        _fail(e, run)
    typer.echo(f"outputs written to {output}")


def _same_units(a: CanonicalUnits, b: CanonicalUnits) -> bool:
    return all(
        math.isclose(x, y, rel_tol=1e-12)
        for x, y in ((a.l_star, b.l_star), (a.t_star, b.t_star), (a.v_star, b.v_star))
    )


def comparison_units(
    paths: Sequence[Path], run: Optional[pipeline.ScenarioRun] = None
) -> CanonicalUnits:
    """Units shared by the trajectory files, from their sidecars or the scenario."""
    recorded = [(path, read_units(path)) for path in paths]
    known = [units for _, units in recorded if units is not None]
    if run is not None:
        reference = run.units
    elif known:
        reference = known[0]
    else:
        reference = BodyConstants().units()
    for path, units in recorded:
        if units is not None and not _same_units(units, reference):
            raise ConfigurationError(
                f"{path} was written with l_star {units.l_star} km, "
                f"expected {reference.l_star} km; the trajectories use different units"
            )
    return reference


@app.command()
def compare(
    trajectory_a: Path = typer.Argument(..., help="First trajectory CSV."),
    trajectory_b: Path = typer.Argument(..., help="Second trajectory CSV."),
    output: Path = typer.Option(..., "--output", "-o", help="Error-series CSV."),
    scenario: Optional[str] = typer.Option(
        None, help="Scenario giving the constants and the dynamics of element trajectories."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Position and velocity differences of two trajectories on one grid."""
    configure_logging(verbose)
    run: Optional[pipeline.ScenarioRun] = None
    try:
        a, b = read_trajectory(trajectory_a), read_trajectory(trajectory_b)
        if scenario is not None:
            run = pipeline.prepare(load_scenario(scenario))
        elif not (a.is_cartesian and b.is_cartesian):
            raise InvalidArgument("comparing element trajectories requires --scenario")
        units = comparison_units([trajectory_a, trajectory_b], run)
        config = None
        if run is not None:
            config = run.config.with_offset(a.u_offset if not a.is_cartesian else b.u_offset)
        errors = compare_trajectories(a, b, units, config)
        write_outputs(output.parent, {output.name: frame_to_csv_text(errors)})
    except (MgeqoeError, OSError) as e:
        _fail(e, run)
    typer.echo(f"error series written to {output}")


@app.command("mc")
def montecarlo(
    scenario: str = typer.Argument(..., help="Scenario file, or name of a bundled scenario."),
    output: Path = typer.Option(..., "--output", "-o", help="Output directory."),
    alpha: float = typer.Option(DEFAULT_ALPHA, help="Significance level of the normality test."),
    epochs: Optional[str] = typer.Option(
        None, help="Snapshot epochs in days since the initial epoch, e.g. 0,2.5,5."
    ),
    hz_subsample: Optional[int] = typer.Option(
        None, "--hz-subsample", help="Test only the first K samples of every epoch."
    ),
    workers: Optional[int] = typer.Option(
        None, help="Worker processes, capped by MGEQOE_THREADS."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Monte Carlo ensembles, Henze-Zirkler series and pairs-plot data."""
    configure_logging(verbose)
    run: Optional[pipeline.ScenarioRun] = None
    try:
        run = pipeline.prepare(load_scenario(scenario))
        result = pipeline.run_montecarlo(
            run,
            alpha=alpha,
            epochs_days=parse_epochs(epochs),
            hz_subsample=hz_subsample,
            n_jobs=workers,
        )
        write_outputs(output, pipeline.montecarlo_outputs(run, result))
    except (MgeqoeError, OSError) as e:
        _fail(e, run)
    typer.echo(f"outputs written to {output}")


def main() -> None:
    app()


if __name__ == "__main__":
    main()
