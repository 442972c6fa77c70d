"""
PoissonOrbits - Command Line Interface
"""

import logging
import sys
from typing import Optional, Tuple

import click

from ..core.errors import ConfigurationError
from ..version import __app_name__, __version__
from .commands import (
    EXIT_CONFIG,
    archive_run,
    cmd_analyze,
    cmd_list_scenarios,
    cmd_sweep,
    error_document,
    render_document,
    write_output,
)
from .config import OUTPUT_FORMATS, RunConfig, apply_overrides, environment_defaults, load_config

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def _load(ctx: click.Context, config_path: str, order: Optional[int], epsilons: Tuple[float, ...],
          verify: Optional[str], out: Optional[str], output_format: Optional[str],
          workers: Optional[int]) -> RunConfig:
    config = load_config(config_path, ctx.obj["env"])
    return apply_overrides(
        config,
        order=order,
        epsilons=list(epsilons) or None,
        verify=None if verify is None else verify == "on",
        output_path=out,
        output_format=output_format,
        workers=workers,
    )


def _finish(ctx: click.Context, command: str, config: Optional[RunConfig], document: dict, exit_code: int) -> None:
    archive_run(ctx.obj["archive"], command, config, document, exit_code)
    path = config.output_path if config else None
    output_format = config.output_format if config else "json"
    text = write_output(document, output_format, path)
    if text is not None:
        click.echo(text, nl=False)
    ctx.exit(exit_code)


def _run_options(fn):
    options = [
        click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                     help="JSON run configuration"),
        click.option("--order", type=click.IntRange(1, 2), default=None, help="Averaging order (1 or 2)"),
        click.option("--epsilon", "epsilons", type=float, multiple=True,
                     help="Perturbation size; repeat for a continuation list"),
        click.option("--out", default=None, help="Output file (default: stdout)"),
        click.option("--format", "output_format", type=click.Choice(OUTPUT_FORMATS), default=None,
                     help="Output format"),
        click.option("--verify", type=click.Choice(["on", "off"]), default=None,
                     help="Poincare shooting on located zeros"),
        click.option("--workers", type=int, default=None, help="Worker threads"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group()
@click.option("--log-level", default=None, help="Logging level (default from POISSON_ORBITS_LOG_LEVEL or INFO)")
@click.option("--quiet", is_flag=True, help="Only log warnings and hide progress bars")
@click.option("--archive", default=None, help="Archive runs in this workspace directory")
@click.version_option(__version__, prog_name=__app_name__)
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str], quiet: bool, archive: Optional[str]):
    """Periodic orbits of perturbed Poisson systems by averaging."""
    env = environment_defaults()
    level = "WARNING" if quiet else (log_level or env.log_level).upper()
    configure_logging(level)
    ctx.ensure_object(dict)
    ctx.obj.update({"env": env, "quiet": quiet, "archive": archive or env.archive})


@cli.command()
@_run_options
@click.pass_context
def analyze(ctx: click.Context, config_path, order, epsilons, out, output_format, verify, workers):
    """Validate, average, find zeros and verify orbits for one scenario."""
    try:
        config = _load(ctx, config_path, order, epsilons, verify, out, output_format, workers)
    except ConfigurationError as e:
        logger.error(f"Invalid configuration {config_path}: {str(e)}")
        click.echo(render_document(error_document(e)), nl=False)
        ctx.exit(EXIT_CONFIG)
        return
    document, exit_code = cmd_analyze(config, progress=not ctx.obj["quiet"])
    _finish(ctx, "analyze", config, document, exit_code)


@cli.command()
@_run_options
@click.pass_context
def sweep(ctx: click.Context, config_path, order, epsilons, out, output_format, verify, workers):
    """Count zeros (and shoot orbits) across one swept parameter."""
    try:
        config = _load(ctx, config_path, order, epsilons, verify, out, output_format, workers)
    except ConfigurationError as e:
        logger.error(f"Invalid configuration {config_path}: {str(e)}")
        click.echo(render_document(error_document(e)), nl=False)
        ctx.exit(EXIT_CONFIG)
        return
    document, exit_code = cmd_sweep(config, progress=not ctx.obj["quiet"])
    _finish(ctx, "sweep", config, document, exit_code)


@cli.command("list-scenarios")
@click.option("--json", "as_json", is_flag=True, help="Print the registry as JSON")
def list_scenarios_command(as_json: bool):
    """Show the registered scenarios and their parameters."""
    click.echo(cmd_list_scenarios(as_json))


def main() -> None:
    cli(obj={})


if __name__ == "__main__":
    main()
