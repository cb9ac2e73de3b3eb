"""Application use cases for gfou."""

import asyncio
import dataclasses
import logging
from pathlib import Path
from typing import Any

from gfou.application.factories import (
    create_config_repository,
    create_plotdata_writer,
    create_record_writer,
    create_runner,
    create_summary_writer,
    create_trajectory_reader,
    create_trajectory_writer,
)
from gfou.config.config import Config
from gfou.domain.appendix import LemmaSweepConfig, lemma_sweep
from gfou.domain.covariance import CovarianceModel, HypothesisReport, check_hypothesis
from gfou.domain.entities import (
    AsymptoticConstants,
    EstimateRecord,
    ExperimentConfig,
    GridSpec,
    McSummary,
    OracleReport,
    Trajectory,
)
from gfou.domain.estimators import asymptotic_constants, estimate_all
from gfou.domain.exceptions import ConfigError
from gfou.domain.simulate import build_gram, ou_trajectory

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class SimulationRequest:
    """Parameters of a single simulated trajectory."""

    model: CovarianceModel
    theta: float
    sigma: float
    T: float
    seed: int
    n: int | None = None  # Defaults to steps_per_unit_time * T

    def grid(self, steps_per_unit_time: float) -> GridSpec:
        if self.n is None:
            return GridSpec.from_horizon(self.T, steps_per_unit_time)
        return GridSpec(self.T, self.n)


class SimulateTrajectory:
    """Use case for simulating one OU trajectory."""

    def __init__(self, config: Config, request: SimulationRequest) -> None:
        """Initialize the use case.

        Args:
            config: Application configuration
            request: What to simulate
        """
        self.config = config
        self.request = request

    def _simulate(self) -> Trajectory:
        sim = self.config.simulation
        req = self.request
        grid = req.grid(sim.steps_per_unit_time)
        gram = build_gram(req.model, grid, sim.jitter_start, sim.jitter_max)
        return ou_trajectory(req.model, req.theta, req.sigma, grid, req.seed, gram=gram)

    async def execute(self, out: Path | None = None, fmt: str = "csv") -> Trajectory:
        """Simulate, and write the trajectory when out is given.

        Raises:
            NonPsdError: If the increment covariance cannot be factored
            StorageError: If writing fails
        """
        logger.info(
            "Simulating %s, theta=%g, sigma=%g, T=%g, seed=%d",
            self.request.model.descriptor,
            self.request.theta,
            self.request.sigma,
            self.request.T,
            self.request.seed,
        )
        trajectory = await asyncio.to_thread(self._simulate)
        if out is not None:
            create_trajectory_writer(fmt).write_trajectory(trajectory, out)
            logger.info("Trajectory written to %s", out)
        return trajectory


class EstimateDrift:
    """Use case for estimating theta from a stored or freshly simulated trajectory."""

    def __init__(
        self,
        config: Config,
        request: SimulationRequest | None = None,
        input_path: Path | None = None,
        hurst: float | None = None,
    ) -> None:
        """Initialize the use case.

        Args:
            config: Application configuration
            request: Simulation parameters (used when no input file is given)
            input_path: Trajectory CSV to read instead of simulating
            hurst: H handed to the estimators (defaults to the model's effective H)
        """
        if request is None and input_path is None:
            raise ValueError("Need a simulation request or an input trajectory")
        self.config = config
        self.request = request
        self.input_path = input_path
        self.hurst = hurst

    def _estimate(self, trajectory: Trajectory) -> EstimateRecord:
        sim = self.config.simulation
        gram = build_gram(trajectory.model, trajectory.grid, sim.jitter_start, sim.jitter_max)
        hurst = trajectory.model.hurst_eff if self.hurst is None else self.hurst
        return estimate_all(trajectory, gram, hurst, theta_true=trajectory.theta)

    async def execute(self, out: Path | None = None, fmt: str = "csv") -> EstimateRecord:
        """Estimate, and write the record when out is given.

        Raises:
            DegenerateInputError: If the trajectory is identically zero
            StorageError: If the input cannot be read or the output written
        """
        if self.input_path is not None:
            trajectory = create_trajectory_reader().read_trajectory(self.input_path)
            logger.info(
                "Read trajectory from %s (T=%g, n=%d)",
                self.input_path,
                trajectory.grid.T,
                trajectory.grid.n,
            )
        else:
            assert self.request is not None
            trajectory = await SimulateTrajectory(self.config, self.request).execute()
        record = await asyncio.to_thread(self._estimate, trajectory)
        if out is not None:
            create_trajectory_writer(fmt).write_estimate(record, out)
        return record


class CheckHypothesis:
    """Use case for the grid check of the covariance remainder."""

    def __init__(self, model: CovarianceModel, grid: GridSpec, margin: float | None) -> None:
        """Initialize the use case."""
        self.model = model
        self.grid = grid
        self.margin = margin

    async def execute(self) -> HypothesisReport:
        """Run the check; violations are reported, not raised."""
        report = await asyncio.to_thread(check_hypothesis, self.model, self.grid, self.margin)
        if report.violations:
            logger.warning(
                "%s: %d hypothesis violations on T=%g, n=%d",
                self.model.descriptor,
                report.violations,
                self.grid.T,
                self.grid.n,
            )
        return report


class VerifyLemmas:
    """Use case for the oracle sweep of the auxiliary integrals."""

    def __init__(
        self, config: Config, sweep_file: Path | None = None, hurst: float | None = None
    ) -> None:
        """Initialize the use case.

        Args:
            config: Application configuration (supplies tolerances and worker cap)
            sweep_file: YAML/JSON sweep description (None for the default sweep)
            hurst: Overrides the sweep's H
        """
        self.config = config
        self.sweep_file = sweep_file
        self.hurst = hurst

    async def load_sweep(self) -> LemmaSweepConfig:
        """Sweep configuration: application defaults, then the file, then --H.

        Raises:
            ConfigError: If the sweep file is invalid
        """
        q = self.config.quadrature
        data: dict[str, Any] = {
            "rtol": q.rtol,
            "atol": q.atol,
            "max_depth": q.max_depth,
            "contraction_max_cells": self.config.experiment.contraction_max_cells,
            "workers": self.config.system.threads or 1,
        }
        if self.sweep_file is not None:
            repo = create_config_repository(self.sweep_file)
            if not await repo.exists():
                raise ConfigError(f"Sweep config not found: {self.sweep_file}")
            data.update(await repo.load())
        if self.hurst is not None:
            data["H"] = self.hurst
        try:
            return LemmaSweepConfig.from_dict(data)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid lemma sweep config: {e}") from e

    async def execute(self, out: Path | None = None) -> list[OracleReport]:
        """Run the sweep; item failures are part of the reports."""
        sweep = await self.load_sweep()
        logger.info("Running %d oracle items at H=%g", len(sweep.items), sweep.H)
        reports = await asyncio.to_thread(lemma_sweep, sweep)
        if out is not None:
            create_summary_writer(out).write_reports(reports)
        return reports


class RunExperiment:
    """Use case for a Monte Carlo experiment."""

    def __init__(
        self,
        config: Config,
        experiment_file: Path,
        out: Path | None = None,
        threads: int | None = None,
        master_seed: int | None = None,
    ) -> None:
        """Initialize the use case.

        Args:
            config: Application configuration
            experiment_file: JSON experiment description
            out: Output directory (overrides the file's output path)
            threads: Worker count (overrides the file's threads)
            master_seed: Overrides the file's master_seed
        """
        self.config = config
        self.experiment_file = experiment_file
        self.out = out
        self.threads = threads
        self.master_seed = master_seed

    async def load_experiment(self) -> ExperimentConfig:
        """Read and validate the experiment file, applying command-line overrides.

        Raises:
            ConfigError: If the file is missing or invalid
        """
        repo = create_config_repository(self.experiment_file)
        if not await repo.exists():
            raise ConfigError(f"Experiment config not found: {self.experiment_file}")
        data = await repo.load()
        data.setdefault("steps_per_unit_time", self.config.simulation.steps_per_unit_time)
        try:
            experiment = ExperimentConfig.from_dict(data)
            overrides: dict[str, Any] = {}
            if self.out is not None:
                overrides["output"] = self.out
            if self.threads is not None:
                overrides["threads"] = self.threads
            if self.master_seed is not None:
                overrides["master_seed"] = self.master_seed
            return dataclasses.replace(experiment, **overrides)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid experiment config {self.experiment_file}: {e}") from e

    async def execute(self) -> McSummary:
        """Run all cells and write records, summary, plot data and runtime metadata.

        Raises:
            ExperimentError: If a cell exceeds the failure cap
            StorageError: If an output cannot be written
        """
        experiment = await self.load_experiment()
        out_dir = experiment.output
        runner = create_runner(self.config, create_record_writer(out_dir))
        summary = await asyncio.to_thread(runner.run_experiment, experiment)

        writer = create_summary_writer(out_dir)
        writer.write_summary(summary)
        create_plotdata_writer(out_dir).write(summary)
        writer.write_runtime(summary.runtime)
        logger.info("Experiment finished: %d cells written to %s", len(summary.cells), out_dir)
        return summary


class ComputeConstants:
    """Use case for the limiting variances and the Berry-Esseen exponent."""

    def __init__(self, theta: float, hurst: float) -> None:
        """Initialize the use case."""
        self.theta = theta
        self.hurst = hurst

    async def execute(self) -> AsymptoticConstants:
        """Evaluate the constants.

        Raises:
            DomainError: If H is outside (0, 1/2)
        """
        return asymptotic_constants(self.theta, self.hurst)
