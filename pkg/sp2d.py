# sp2d.py
"""
Command line:  python sp2d.py <preset> [--config run.cfg] [--out runs/x]

Exit codes: 0 every check passed, 1 a check failed or the solver aborted, 2 usage error.
"""

import logging
import os
import time

import click

from models.config import load_config
from models.errors import ConfigError
from models.experiments import PRESETS, run_experiment

logger = logging.getLogger("sp2d")


@click.command("sp2d")
@click.argument("preset", type=click.Choice(sorted(PRESETS)))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="key = value run configuration (defaults when omitted)")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="run directory (output.dir of the config by default)")
@click.pass_context
def cli(ctx, preset, config_path, out_dir):
    """Run an experiment preset and write its artifacts."""
    try:
        cfg = load_config(config_path)
    except ConfigError as e:
        raise click.UsageError(str(e), ctx=ctx)

    started = time.perf_counter()
    result = run_experiment(preset, cfg, out_dir)
    logger.info(f"{preset} took {time.perf_counter() - started:.1f}s")

    failed = [c["name"] for c in result.summary["checks"] if not c["passed"]]
    click.echo(f"{result.status}: {result.run_dir}")
    if failed:
        click.echo(f"failed checks: {', '.join(failed)}")
    if result.summary.get("message"):
        click.echo(f"error: {result.summary['message']}")
    ctx.exit(result.exit_code)


if __name__ == "__main__":
    logging.basicConfig(
        level=os.environ.get("LOG_LEVEL", "INFO"),
        format="%(levelname)s:%(name)s:%(message)s",
    )
    cli()
