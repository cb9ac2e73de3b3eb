"""mc-run command: Monte Carlo experiment."""

import asyncio
import io
from pathlib import Path
from typing import Any

import click
from rich.console import Console

from gfou.adapters.storage.csv_adapter import dump_rows
from gfou.adapters.storage.json_adapter import dumps
from gfou.application.use_cases import RunExperiment
from gfou.cli.formatting import rows_table, significant
from gfou.cli.options import emit, load_config
from gfou.domain.entities import McSummary

TABLE_COLUMNS = (
    "T",
    "reps",
    "failures",
    "me_mean",
    "me_scaled_var",
    "me_target",
    "me_ks",
    "lse_skorohod_mean",
    "q_t_var",
    "q_t_target_a",
    "q_t_ks_a",
)


def cell_rows(summary: McSummary) -> list[dict[str, Any]]:
    """One flat row per T-cell."""
    rows = []
    for cell in summary.cells:
        row: dict[str, Any] = {
            "T": cell.T,
            "n": cell.n,
            "reps": cell.replications,
            "failures": cell.failures,
            "small_sample": cell.small_sample,
            "b_T": cell.b_T,
        }
        for name, stats in cell.estimators.items():
            row[f"{name}_mean"] = stats.mean
            row[f"{name}_median"] = stats.median
            row[f"{name}_scaled_var"] = stats.scaled_variance
            row[f"{name}_scaled_var_se"] = stats.scaled_variance_se
            row[f"{name}_target"] = stats.target_variance
            row[f"{name}_ks"] = stats.ks
        chaos = cell.chaos
        row.update(
            {
                "q_t_var": chaos.variance,
                "q_t_var_se": chaos.variance_se,
                "q_t_target_a": chaos.target_variance_a,
                "q_t_target_b": chaos.target_variance_b,
                "q_t_ks_a": chaos.ks_a,
                "q_t_ks_b": chaos.ks_b,
            }
        )
        rows.append(row)
    return rows


@click.command("mc-run")
@click.option(
    "--config",
    "experiment_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),  # type: ignore[type-var]
    required=True,
    help="JSON experiment description",
)
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads")
@click.option("--seed", type=int, default=None, help="Override the config's master_seed")
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),  # type: ignore[type-var]
    default=None,
    help="Output directory (overrides the config's output)",
)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "json", "table"]),
    default="table",
    show_default=True,
)
@click.pass_context
def mc_run(
    ctx: click.Context,
    experiment_file: Path,
    threads: int | None,
    seed: int | None,
    out: Path | None,
    fmt: str,
) -> None:
    """Run a Monte Carlo experiment.

    Writes records.csv, summary.json, plotdata/*.tsv and runtime.json into the
    output directory and prints the per-cell summary.
    """
    console: Console = ctx.obj["console"]

    async def _run() -> None:
        config = await load_config(ctx)
        use_case = RunExperiment(
            config, experiment_file, out=out, threads=threads, master_seed=seed
        )
        summary = await use_case.execute()
        rows = cell_rows(summary)

        if fmt == "csv":
            buffer = io.StringIO()
            dump_rows([significant(row) for row in rows], buffer)
            emit(buffer.getvalue())
        elif fmt == "json":
            emit(dumps(significant(summary.to_dict())))
        else:
            columns = [c for c in TABLE_COLUMNS if c in rows[0]] if rows else []
            console.print(rows_table("Monte Carlo summary", rows, columns))
            for key, fit in summary.rate_fits.items():
                if fit is not None:
                    console.print(f"KS rate {key}: slope {fit.slope:.6g} (r2 {fit.r2:.6g})")
            console.print(f"[green]✓ Results written to {summary.config.output}[/green]")

    asyncio.run(_run())
