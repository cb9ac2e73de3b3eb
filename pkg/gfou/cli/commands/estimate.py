"""Estimate command: drift estimators on one trajectory."""

import asyncio
import io
from pathlib import Path

import click
from rich.console import Console

from gfou.adapters.storage.csv_adapter import dump_estimate
from gfou.adapters.storage.json_adapter import dumps
from gfou.application.use_cases import EstimateDrift, SimulationRequest
from gfou.cli.formatting import SIGNIFICANT_DIGITS, key_value_table, significant
from gfou.cli.options import (
    build_model,
    common_options,
    emit,
    load_config,
    simulation_options,
)


@click.command()
@simulation_options
@click.option(
    "--input",
    "input_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),  # type: ignore[type-var]
    default=None,
    help="Trajectory CSV to estimate from (instead of simulating one)",
)
@common_options
@click.pass_context
def estimate(
    ctx: click.Context,
    family: str,
    hurst: float | None,
    k: float | None,
    model_json: str | None,
    theta: float,
    sigma: float,
    horizon: float,
    n: int | None,
    input_path: Path | None,
    seed: int,
    out: Path | None,
    fmt: str,
) -> None:
    """Run the moment and least squares estimators.

    With --input the stored trajectory is used and --H, when given, overrides the
    Hurst exponent from its header; otherwise a trajectory is simulated first.
    """
    console: Console = ctx.obj["console"]

    async def _estimate() -> None:
        config = await load_config(ctx)
        if input_path is not None:
            use_case = EstimateDrift(config, input_path=input_path, hurst=hurst)
        else:
            request = SimulationRequest(
                model=build_model(family, hurst, k, model_json),
                theta=theta,
                sigma=sigma,
                T=horizon,
                seed=seed,
                n=n,
            )
            use_case = EstimateDrift(config, request=request, hurst=hurst)
        record = await use_case.execute(out=out, fmt=fmt)

        if out is not None:
            ctx.obj["err_console"].print(f"[green]✓ Estimate written to {out}[/green]")
        elif fmt == "csv":
            buffer = io.StringIO()
            dump_estimate(record, buffer, digits=SIGNIFICANT_DIGITS)
            emit(buffer.getvalue())
        elif fmt == "json":
            emit(dumps(significant(record.to_dict())))
        if fmt == "table":
            console.print(key_value_table(f"Estimates ({record.model})", record.to_dict()))

    asyncio.run(_estimate())
