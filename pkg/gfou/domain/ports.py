"""Port interfaces (contracts) for the gfou toolkit.

These interfaces define the boundaries between the numerical core and the storage and
configuration adapters, following the hexagonal architecture pattern.
"""

from abc import ABC, abstractmethod
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from gfou.domain.entities import (
    EstimateRecord,
    McSummary,
    OracleReport,
    ReplicationRecord,
    Trajectory,
)


class IConfigRepository(ABC):
    """Port for reading configuration documents."""

    @abstractmethod
    async def load(self) -> dict[str, Any]:
        """Load the configuration mapping.

        Returns:
            dict[str, Any]: Parsed mapping (empty for an empty file)

        Raises:
            ConfigError: If the file cannot be read or is not a mapping
        """
        ...

    @abstractmethod
    async def exists(self) -> bool:
        """Check whether the configuration file exists."""
        ...


class IRecordWriter(ABC):
    """Port for the per-replication records of a Monte Carlo run."""

    @abstractmethod
    def write(self, records: Sequence[ReplicationRecord]) -> None:
        """Append the records of one T-cell, in replication order.

        Raises:
            StorageError: If writing fails
        """
        ...


class ISummaryWriter(ABC):
    """Port for aggregated results and reports."""

    @abstractmethod
    def write_summary(self, summary: McSummary) -> Path:
        """Write the deterministic summary and return its path."""
        ...

    @abstractmethod
    def write_runtime(self, runtime: dict[str, Any]) -> Path:
        """Write wall-clock metadata, kept apart from the summary."""
        ...

    @abstractmethod
    def write_reports(self, reports: Sequence[OracleReport]) -> Path:
        """Write oracle reports as a JSON array."""
        ...


class IPlotDataWriter(ABC):
    """Port for tabular plot data."""

    @abstractmethod
    def write(self, summary: McSummary) -> list[Path]:
        """Write one table per plotted relation and return the paths."""
        ...


class ITrajectoryWriter(ABC):
    """Port for exporting trajectories and single estimates."""

    @abstractmethod
    def write_trajectory(self, trajectory: Trajectory, path: Path) -> None:
        """Write a trajectory with its provenance header.

        Raises:
            StorageError: If writing fails
        """
        ...

    @abstractmethod
    def write_estimate(self, record: EstimateRecord, path: Path) -> None:
        """Write one estimate record."""
        ...


class ITrajectoryReader(ABC):
    """Port for reading stored trajectories back."""

    @abstractmethod
    def read_trajectory(self, path: Path) -> Trajectory:
        """Read a trajectory written by an ITrajectoryWriter.

        Raises:
            StorageError: If the file is missing or malformed
        """
        ...
