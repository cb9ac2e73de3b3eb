"""Constants command: limiting variances and the Berry-Esseen exponent."""

import asyncio
import io
from pathlib import Path

import click
from rich.console import Console

from gfou.adapters.storage.csv_adapter import dump_rows, write_rows
from gfou.adapters.storage.json_adapter import dumps, write_json
from gfou.application.use_cases import ComputeConstants
from gfou.cli.formatting import key_value_table, significant
from gfou.cli.options import common_options, emit, load_config


@click.command()
@click.option("--H", "hurst", type=float, required=True, help="Hurst exponent in (0, 1/2)")
@click.option("--theta", type=float, default=1.0, show_default=True)
@common_options
@click.pass_context
def constants(
    ctx: click.Context,
    hurst: float,
    theta: float,
    seed: int,  # noqa: ARG001
    out: Path | None,
    fmt: str,
) -> None:
    """Print sigma_H^2, the limiting variances of both estimators, and delta(H).

    --out writes CSV with --format csv and JSON otherwise.
    """
    console: Console = ctx.obj["console"]

    async def _constants() -> None:
        await load_config(ctx)
        data = (await ComputeConstants(theta, hurst).execute()).to_dict()
        if out is not None:
            if fmt == "csv":
                write_rows([data], out)
            else:
                write_json(data, out)
        if fmt == "csv":
            buffer = io.StringIO()
            dump_rows([significant(data)], buffer)
            emit(buffer.getvalue())
        elif fmt == "json":
            emit(dumps(significant(data)))
        else:
            console.print(key_value_table("Asymptotic constants", data))

    asyncio.run(_constants())
