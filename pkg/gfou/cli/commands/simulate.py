"""Simulate command: one OU trajectory."""

import asyncio
import io
from pathlib import Path

import click
import numpy as np
from rich.console import Console

from gfou.adapters.storage.csv_adapter import dump_trajectory
from gfou.adapters.storage.json_adapter import dumps, trajectory_document
from gfou.application.use_cases import SimulateTrajectory, SimulationRequest
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
@common_options
@click.pass_context
def simulate(
    ctx: click.Context,
    family: str,
    hurst: float | None,
    k: float | None,
    model_json: str | None,
    theta: float,
    sigma: float,
    horizon: float,
    n: int | None,
    seed: int,
    out: Path | None,
    fmt: str,
) -> None:
    """Simulate dX = -theta X dt + sigma dG on [0, T] from X_0 = 0."""
    console: Console = ctx.obj["console"]

    async def _simulate() -> None:
        config = await load_config(ctx)
        request = SimulationRequest(
            model=build_model(family, hurst, k, model_json),
            theta=theta,
            sigma=sigma,
            T=horizon,
            seed=seed,
            n=n,
        )
        trajectory = await SimulateTrajectory(config, request).execute(out=out, fmt=fmt)

        if out is not None:
            ctx.obj["err_console"].print(f"[green]✓ Trajectory written to {out}[/green]")
        elif fmt == "csv":
            buffer = io.StringIO()
            dump_trajectory(trajectory, buffer, digits=SIGNIFICANT_DIGITS)
            emit(buffer.getvalue())
        elif fmt == "json":
            emit(dumps(significant(trajectory_document(trajectory))))
        if fmt == "table":
            x = trajectory.X
            console.print(
                key_value_table(
                    f"Trajectory ({trajectory.model.descriptor})",
                    {
                        "T": trajectory.grid.T,
                        "n": trajectory.grid.n,
                        "theta": trajectory.theta,
                        "sigma": trajectory.sigma,
                        "seed": seed,
                        "X_T": float(x[-1]),
                        "mean X^2": float(np.mean(x**2)),
                        "max |X|": float(np.max(np.abs(x))),
                    },
                )
            )

    asyncio.run(_simulate())
