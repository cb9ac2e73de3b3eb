"""Factories for creating adapters and services with dependency injection."""

from pathlib import Path

from gfou.adapters.config.yaml_adapter import YAMLConfigRepository
from gfou.adapters.storage.csv_adapter import CsvRecordWriter, CsvTrajectoryStore
from gfou.adapters.storage.json_adapter import JsonSummaryWriter, JsonTrajectoryWriter
from gfou.adapters.storage.plotdata_adapter import TsvPlotDataWriter
from gfou.config.config import Config
from gfou.domain.ports import (
    IConfigRepository,
    IPlotDataWriter,
    IRecordWriter,
    ISummaryWriter,
    ITrajectoryReader,
    ITrajectoryWriter,
)
from gfou.domain.services import MonteCarloRunner

RECORDS_FILE = "records.csv"
PLOTDATA_DIR = "plotdata"


def create_config_repository(path: Path) -> IConfigRepository:
    """Repository for a YAML or JSON document."""
    return YAMLConfigRepository(path)


def create_trajectory_writer(fmt: str) -> ITrajectoryWriter:
    """Trajectory writer for an output format.

    Args:
        fmt: "json", or "csv"/"table" (files are always CSV for those)

    Returns:
        ITrajectoryWriter: Writer adapter
    """
    if fmt == "json":
        return JsonTrajectoryWriter()
    return CsvTrajectoryStore()


def create_trajectory_reader() -> ITrajectoryReader:
    """Reader for trajectory CSV files."""
    return CsvTrajectoryStore()


def create_record_writer(out_dir: Path) -> IRecordWriter:
    """records.csv writer inside out_dir."""
    return CsvRecordWriter(out_dir / RECORDS_FILE)


def create_summary_writer(out_dir: Path) -> ISummaryWriter:
    """summary.json / runtime.json writer inside out_dir."""
    return JsonSummaryWriter(out_dir)


def create_plotdata_writer(out_dir: Path) -> IPlotDataWriter:
    """plotdata/*.tsv writer inside out_dir."""
    return TsvPlotDataWriter(out_dir / PLOTDATA_DIR)


def create_runner(config: Config, record_writer: IRecordWriter | None) -> MonteCarloRunner:
    """Monte Carlo runner wired to the configured policy.

    Args:
        config: Application configuration
        record_writer: Sink for per-replication records

    Returns:
        MonteCarloRunner: Configured runner
    """
    return MonteCarloRunner(
        record_writer=record_writer,
        failure_cap=config.experiment.failure_cap,
        small_sample=config.experiment.small_sample,
        jitter_start=config.simulation.jitter_start,
        jitter_max=config.simulation.jitter_max,
        tolerance=config.quadrature.tolerance,
        max_workers=config.system.threads,
    )
