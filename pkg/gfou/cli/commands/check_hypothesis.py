"""Check-hypothesis command: grid check of the covariance remainder."""

import asyncio
import io
from pathlib import Path

import click
from rich.console import Console

from gfou.adapters.storage.csv_adapter import dump_rows, write_rows
from gfou.adapters.storage.json_adapter import dumps, write_json
from gfou.application.use_cases import CheckHypothesis
from gfou.cli.formatting import key_value_table, significant
from gfou.cli.options import build_model, common_options, emit, load_config, model_options
from gfou.domain.entities import GridSpec


@click.command("check-hypothesis")
@model_options
@click.option("--T", "horizon", type=float, default=10.0, show_default=True, help="Horizon")
@click.option("--n", type=int, default=200, show_default=True, help="Grid steps")
@click.option(
    "--margin",
    type=float,
    default=None,
    help="Distance kept from the axes and the diagonal (default: one cell)",
)
@common_options
@click.pass_context
def check_hypothesis(
    ctx: click.Context,
    family: str,
    hurst: float | None,
    k: float | None,
    model_json: str | None,
    horizon: float,
    n: int,
    margin: float | None,
    seed: int,  # noqa: ARG001
    out: Path | None,
    fmt: str,
) -> int:
    """Report sup |Psi(t,s)| (ts)^(1-H) on a grid; exits 1 on violations.

    --out writes CSV with --format csv and JSON otherwise.
    """
    console: Console = ctx.obj["console"]

    async def _check() -> int:
        await load_config(ctx)
        model = build_model(family, hurst, k, model_json)
        report = await CheckHypothesis(model, GridSpec(horizon, n), margin).execute()
        data = report.to_dict()
        row = {**data, "model": model.descriptor}

        if out is not None:
            if fmt == "csv":
                write_rows([row], out)
            else:
                write_json(data, out)
        if fmt == "csv":
            buffer = io.StringIO()
            dump_rows([significant(row)], buffer)
            emit(buffer.getvalue())
        elif fmt == "json":
            emit(dumps(significant(data)))
        else:
            table_data = {**data, "model": model.descriptor, "passed": report.passed}
            console.print(key_value_table("Hypothesis check", table_data))
        return 0 if report.passed else 1

    return asyncio.run(_check())
