"""Main CLI entry point for gfou."""

import logging
import logging.handlers
import pathlib
import sys
from collections.abc import Sequence
from pathlib import Path

import click
from rich.console import Console

from gfou import __version__
from gfou.cli.formatting import error_json
from gfou.domain.exceptions import AccuracyError, GfouError, StorageError

# Tables go to stdout with the results; status and errors to stderr
console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ACCURACY = 2
EXIT_STORAGE = 3


def setup_logging(log_level: str = "INFO", log_file: Path | None = None) -> None:
    """Set up logging configuration.

    Args:
        log_level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional file path for logging
    """
    numeric_level = getattr(logging, log_level.upper(), logging.INFO)
    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s", datefmt="%Y-%m-%d %H:%M:%S"
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # stdout carries results only
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
        )
        file_handler.setLevel(numeric_level)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)


@click.group()
@click.version_option(version=__version__, prog_name="gfou")
@click.option(
    "--config-file",
    type=click.Path(path_type=pathlib.Path),  # type: ignore[type-var]
    default=None,
    help="Path to a YAML or JSON configuration file",
)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
@click.option("--quiet", "-q", is_flag=True, help="Only log errors")
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], case_sensitive=False),
    default=None,
    help="Set logging level",
)
@click.pass_context
def cli(
    ctx: click.Context,
    config_file: Path | None,
    verbose: bool,
    quiet: bool,
    log_level: str | None,
) -> None:
    """gfou - Ornstein-Uhlenbeck drift estimation under general Gaussian noise.

    Simulates OU paths driven by fBm-like noises, estimates the drift, checks the
    covariance hypotheses and auxiliary limits, and runs Monte Carlo experiments.
    """
    ctx.ensure_object(dict)
    ctx.obj["config_file"] = config_file
    ctx.obj["console"] = console
    ctx.obj["err_console"] = err_console

    # --verbose forces DEBUG, --quiet forces ERROR, otherwise --log-level or the config
    if verbose:
        effective_log_level: str | None = "DEBUG"
    elif quiet:
        effective_log_level = "ERROR"
    else:
        effective_log_level = log_level
    ctx.obj["effective_log_level"] = effective_log_level
    ctx.obj["active_log_level"] = effective_log_level or "INFO"
    setup_logging(log_level=ctx.obj["active_log_level"])


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the process exit code."""
    if isinstance(error, AccuracyError):
        return EXIT_ACCURACY
    if isinstance(error, StorageError | OSError):
        return EXIT_STORAGE
    return EXIT_INVALID


def _requested_format(argv: Sequence[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--format" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--format="):
            return arg.split("=", 1)[1]
    return None


def _report_error(error: BaseException, code: int, argv: Sequence[str]) -> None:
    if _requested_format(argv) == "json":
        click.echo(error_json(error, code), err=True)
    else:
        err_console.print(f"[red]Error ({type(error).__name__}): {error}[/red]")


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Run the CLI on argv and return the exit code instead of exiting."""
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = cli.main(args=args, prog_name="gfou", standalone_mode=False)
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.ClickException as e:
        if _requested_format(args) == "json":
            click.echo(error_json(e, EXIT_INVALID), err=True)
        else:
            e.show()
        return EXIT_INVALID
    except click.exceptions.Abort:
        err_console.print("[yellow]Aborted[/yellow]")
        return EXIT_INVALID
    except (GfouError, ValueError, OSError) as e:
        code = exit_code_for(e)
        logging.getLogger(__name__).debug("Command failed", exc_info=True)
        _report_error(e, code, args)
        return code
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    """Console script entry point."""
    sys.exit(dispatch())


# Import and register commands
from gfou.cli.commands.check_hypothesis import check_hypothesis  # noqa: E402
from gfou.cli.commands.constants import constants  # noqa: E402
from gfou.cli.commands.estimate import estimate  # noqa: E402
from gfou.cli.commands.mc_run import mc_run  # noqa: E402
from gfou.cli.commands.simulate import simulate  # noqa: E402
from gfou.cli.commands.verify_lemmas import verify_lemmas  # noqa: E402

cli.add_command(simulate)
cli.add_command(estimate)
cli.add_command(check_hypothesis)
cli.add_command(verify_lemmas)
cli.add_command(mc_run)
cli.add_command(constants)


if __name__ == "__main__":
    main()
