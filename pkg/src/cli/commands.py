"""`refintensity` command line: features, predict, evaluate, rank, stacking, export-graph."""

import functools
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import click
from loguru import logger

from src.conf import constants
from src.conf.settings import settings
from src.services.errors import IntensityError
from src.services.pipeline import RANK_MEASURES, Pipeline, RunConfig
from src.utils.custom_logging import setup_logging

F = TypeVar("F", bound=Callable[..., Any])

_existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


def run_options(command: F) -> F:
    """Options shared by every subcommand; they map onto `RunConfig` fields."""
    options = [
        click.option(
            "--config",
            "config_file",
            type=_existing_file,
            help="TOML file with RunConfig fields; flags win over it.",
        ),
        click.option("--corpus", type=_existing_file, help="Corpus, JSON Lines."),
        click.option("--labels", type=_existing_file, help="citing_id<TAB>key<TAB>label."),
        click.option("--annotations", type=_existing_file, help="POS/dependency sidecar."),
        click.option("--predictions", type=_existing_file, help="Predictions TSV to read."),
        click.option(
            "-o",
            "--output-dir",
            type=click.Path(file_okay=False, path_type=Path),
            help="Directory for every output file.",
        ),
        click.option(
            "--features",
            help=f"Comma-separated groups out of {','.join(constants.FEATURE_GROUPS)}.",
        ),
        click.option("--sigma", type=float, help="Fixed RBF bandwidth."),
        click.option("--tol", type=float),
        click.option("--max-iter", type=int),
        click.option("--mode", type=click.Choice(["gralap", "plain"])),
        click.option("--proportions", help="Five comma-separated class proportions."),
        click.option(
            "--expected-intensity/--hard-labels",
            default=None,
            help="Score with sum(l * p_l) instead of the argmax label.",
        ),
        click.option("--seed", type=int),
        click.option("-k", "--folds", "k", type=int, help="Number of CV folds."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _pipeline(config_file: Path | None, flags: dict[str, Any]) -> Pipeline:
    if flags.get("corpus") is None and config_file is None:
        raise click.UsageError("--corpus is required (or give it in --config)")
    return Pipeline(RunConfig.resolve(flags, config_file))


def handle_errors(command: F) -> F:
    """Report `IntensityError`s as a one-line message and exit status 1."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except IntensityError as e:
            logger.debug(f"{type(e).__name__}: {e}")
            raise click.ClickException(str(e)) from e

    return wrapper  # type: ignore[return-value]


@click.group()
@click.option("--log-level", default=None, help="Overrides INTENSITY_LOG_LEVEL.")
def cli(log_level: str | None) -> None:
    """Reference-intensity labelling and intensity-weighted bibliometrics."""
    setup_logging(
        level=(log_level or settings.log.level).upper(),
        serialize=settings.log.serialize,
    )


@cli.command()
@run_options
@handle_errors
def features(config_file: Path | None, **flags: Any) -> None:
    """Write the feature matrix of every paper-reference pair."""
    path = _pipeline(config_file, flags).write_features()
    logger.info(f"features -> {path}")


@cli.command()
@run_options
@handle_errors
def predict(config_file: Path | None, **flags: Any) -> None:
    """Label every unlabeled pair with label propagation."""
    result = _pipeline(config_file, flags).predict()
    logger.info(f"predict: sigma={result.sigma:.6g} converged={result.converged}")


@cli.command()
@run_options
@click.option("--greedy", is_flag=True, help="Add feature groups one at a time.")
@click.option("--order", help="Comma-separated group order for --greedy.")
@click.option("--baseline", type=click.Choice(["uniform", "plain"]))
@handle_errors
def evaluate(
    config_file: Path | None,
    greedy: bool,
    order: str | None,
    baseline: str | None,
    **flags: Any,
) -> None:
    """k-fold cross-validation against the labels file."""
    group_order = [g.strip().lower() for g in order.split(",")] if order else None
    if group_order is not None and not greedy:
        raise click.UsageError("--order only applies with --greedy")
    _pipeline(config_file, flags).evaluate(
        greedy=greedy, order=group_order, baseline=baseline  # type: ignore[arg-type]
    )


@cli.command()
@run_options
@click.option(
    "--measure",
    type=click.Choice(RANK_MEASURES, case_sensitive=False),
    required=True,
)
@click.option(
    "--correlations",
    is_flag=True,
    help="Also write Spearman correlations among the four paper measures.",
)
@handle_errors
def rank(config_file: Path | None, measure: str, correlations: bool, **flags: Any) -> None:
    """Rank papers (or authors) by a citation measure."""
    path = _pipeline(config_file, flags).rank(measure, correlations=correlations)
    logger.info(f"rank -> {path}")


@cli.command()
@run_options
@click.option("--year", type=int, help="Census year; defaults to the latest in the corpus.")
@handle_errors
def stacking(config_file: Path | None, year: int | None, **flags: Any) -> None:
    """Flag journals whose weighted impact factor deviates from the raw one."""
    report = _pipeline(config_file, flags).stacking(year)
    logger.info(f"stacking: flagged {report['flagged']}")


@cli.command("export-graph")
@run_options
@handle_errors
def export_graph(config_file: Path | None, **flags: Any) -> None:
    """Write the intensity-weighted edge list."""
    path = _pipeline(config_file, flags).export_graph()
    logger.info(f"export-graph -> {path}")
