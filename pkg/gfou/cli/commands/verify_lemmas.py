"""Verify-lemmas command: oracle sweep of the auxiliary integrals."""

import asyncio
import io
from pathlib import Path

import click
from rich.console import Console

from gfou.adapters.storage.csv_adapter import dump_rows
from gfou.adapters.storage.json_adapter import dumps
from gfou.application.use_cases import VerifyLemmas
from gfou.cli.formatting import rows_table, significant
from gfou.cli.options import common_options, emit, load_config

TABLE_COLUMNS = ("name", "status", "reference", "slope", "r2", "values", "detail")


@click.command("verify-lemmas")
@click.option(
    "--config",
    "sweep_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),  # type: ignore[type-var]
    default=None,
    help="Sweep description (YAML or JSON); default sweep when omitted",
)
@click.option("--H", "hurst", type=float, default=None, help="Override the sweep's H")
@common_options
@click.pass_context
def verify_lemmas(
    ctx: click.Context,
    sweep_file: Path | None,
    hurst: float | None,
    seed: int,  # noqa: ARG001
    out: Path | None,
    fmt: str,
) -> None:
    """Check bounds, rates and limits of the auxiliary integrals.

    Items that cannot be evaluated are reported as error, items outside their
    hypothesis range in H as skipped; the sweep itself always completes.
    """
    console: Console = ctx.obj["console"]

    async def _verify() -> None:
        config = await load_config(ctx)
        use_case = VerifyLemmas(config, sweep_file=sweep_file, hurst=hurst)
        if fmt == "table":
            with ctx.obj["err_console"].status("[yellow]Running oracle sweep...[/yellow]"):
                reports = await use_case.execute(out=out)
        else:
            reports = await use_case.execute(out=out)
        rows = [report.to_dict() for report in reports]

        if fmt == "csv":
            buffer = io.StringIO()
            dump_rows([significant(row) for row in rows], buffer)
            emit(buffer.getvalue())
        elif fmt == "json":
            emit(dumps(significant(rows)))
        else:
            console.print(rows_table("Oracle reports", rows, TABLE_COLUMNS))
            passed = sum(report.passed for report in reports)
            console.print(f"{passed}/{len(reports)} passed")

    asyncio.run(_verify())
