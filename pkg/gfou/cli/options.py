"""Options and helpers shared by the subcommands."""

import json
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import click

from gfou.config.config import Config
from gfou.config.loader import ConfigLoader
from gfou.domain.covariance import CovarianceModel

F = TypeVar("F", bound=Callable[..., Any])

FORMATS = ("csv", "json", "table")
FAMILIES = ("fbm", "subfbm", "bifbm", "gensubfbm")


def common_options(func: F) -> F:
    """--seed, --out and --format, shared by every subcommand."""
    func = click.option(
        "--format",
        "fmt",
        type=click.Choice(FORMATS),
        default="table",
        show_default=True,
        help="Output format",
    )(func)
    func = click.option(
        "--out",
        type=click.Path(path_type=Path),  # type: ignore[type-var]
        default=None,
        help="Output file (or directory for mc-run and verify-lemmas)",
    )(func)
    func = click.option("--seed", type=int, default=0, show_default=True, help="Random seed")(func)
    return func


def model_options(func: F) -> F:
    """--model, --H, --K and --model-json."""
    func = click.option(
        "--model-json",
        type=str,
        default=None,
        help="Model as a JSON object, or a path to a JSON file (overrides --model)",
    )(func)
    func = click.option(
        "--K", "k", type=float, default=None, help="Second exponent (bi-fBm, gen-sub-fBm)"
    )(func)
    func = click.option("--H", "hurst", type=float, default=None, help="Hurst exponent")(func)
    func = click.option(
        "--model", "family", type=click.Choice(FAMILIES), default="fbm", show_default=True
    )(func)
    return func


def build_model(
    family: str, hurst: float | None, k: float | None, model_json: str | None
) -> CovarianceModel:
    """Model from --model-json, or from --model/--H/--K.

    Raises:
        click.BadParameter: If the flags do not describe a model
        InvalidModelError: If the parameters are out of range
    """
    if model_json is not None:
        text = model_json
        if not text.lstrip().startswith("{"):
            try:
                text = Path(model_json).read_text()
            except OSError as e:
                raise click.BadParameter(str(e), param_hint="--model-json") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise click.BadParameter(f"Invalid JSON: {e}", param_hint="--model-json") from e
        return CovarianceModel.from_dict(data)

    if hurst is None:
        raise click.BadParameter("--H is required without --model-json", param_hint="--H")
    if family in ("bifbm", "gensubfbm"):
        if k is None:
            raise click.BadParameter(f"--K is required for {family}", param_hint="--K")
        factory = CovarianceModel.bifbm if family == "bifbm" else CovarianceModel.gensubfbm
        return factory(hurst, k)
    return CovarianceModel.fbm(hurst) if family == "fbm" else CovarianceModel.subfbm(hurst)


async def load_config(ctx: click.Context, cli_overrides: dict[str, Any] | None = None) -> Config:
    """Load the application config and reapply logging from it.

    Raises:
        ConfigError: If the configuration is invalid
        OSError: If the log file cannot be opened
    """
    from gfou.cli.main import setup_logging

    loader = ConfigLoader(config_file=ctx.obj.get("config_file"))
    config = await loader.load(cli_overrides=cli_overrides)
    level = ctx.obj.get("effective_log_level") or config.system.log_level
    if config.system.log_file is not None or level != ctx.obj.get("active_log_level"):
        setup_logging(level, config.system.log_file)
        ctx.obj["active_log_level"] = level
    return config


def emit(text: str) -> None:
    """Write machine-readable output to stdout."""
    sys.stdout.write(text)
    sys.stdout.flush()


def simulation_options(func: F) -> F:
    """--theta, --sigma, --T and --n on top of the model options."""
    func = click.option(
        "--n", type=int, default=None, help="Steps (default: steps_per_unit_time * T)"
    )(func)
    func = click.option(
        "--T", "horizon", type=float, default=10.0, show_default=True, help="Horizon"
    )(func)
    func = click.option("--sigma", type=float, default=1.0, show_default=True)(func)
    func = click.option("--theta", type=float, default=1.0, show_default=True)(func)
    return model_options(func)
