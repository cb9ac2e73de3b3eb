"""CSV storage: Monte Carlo records and trajectories with a JSON header line."""

import csv
import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from gfou.domain.covariance import CovarianceModel
from gfou.domain.entities import (
    RECORD_COLUMNS,
    EstimateRecord,
    FloatArray,
    GaussianPath,
    GridSpec,
    ReplicationRecord,
    Seed,
    Trajectory,
)
from gfou.domain.exceptions import GfouError, StorageError
from gfou.domain.ports import IRecordWriter, ITrajectoryReader, ITrajectoryWriter

logger = logging.getLogger(__name__)

HEADER_PREFIX = "# "
TRAJECTORY_COLUMNS = ("t", "X", "G")


class CsvRecordWriter(IRecordWriter):
    """Writes records.csv, one row per successful replication."""

    def __init__(self, path: Path) -> None:
        """Initialize the writer; the file is truncated on the first write.

        Args:
            path: Destination file
        """
        self.path = path
        self._started = False
        self.rows = 0

    def write(self, records: Sequence[ReplicationRecord]) -> None:
        """Append one cell's records, writing the header first if needed.

        Raises:
            StorageError: If writing fails
        """
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a" if self._started else "w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                if not self._started:
                    writer.writerow([*RECORD_COLUMNS, "q_t"])
                    self._started = True
                writer.writerows(rec.to_row() for rec in records)
        except OSError as e:
            raise StorageError(f"Failed to write records to {self.path}: {e}") from e
        self.rows += len(records)
        logger.debug("Wrote %d records to %s", len(records), self.path)


def dump_rows(rows: Sequence[dict[str, Any]], stream: TextIO) -> None:
    """Write mappings as CSV, columns from the first row; lists are joined with ';'."""
    if not rows:
        return
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(list(rows[0]))
    for row in rows:
        writer.writerow(
            ";".join(str(v) for v in value) if isinstance(value, list | tuple) else value
            for value in row.values()
        )


def write_rows(rows: Sequence[dict[str, Any]], path: Path) -> Path:
    """Write mappings to path with dump_rows.

    Raises:
        StorageError: If writing fails
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            dump_rows(rows, f)
    except OSError as e:
        raise StorageError(f"Failed to write {path}: {e}") from e
    logger.debug("Wrote %d rows to %s", len(rows), path)
    return path


def _cell(value: Any, digits: int | None) -> Any:
    if isinstance(value, float | np.floating):
        return repr(float(value)) if digits is None else f"{float(value):.{digits}g}"
    return value


def dump_trajectory(trajectory: Trajectory, stream: TextIO, digits: int | None = None) -> None:
    """Write the provenance line and the t, X, G columns.

    Values keep full precision unless digits (significant) is given.
    """
    g = (
        trajectory.noise.path
        if trajectory.noise is not None
        else np.full_like(trajectory.X, np.nan)
    )
    stream.write(HEADER_PREFIX + json.dumps(trajectory.header()) + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for row in zip(trajectory.times, trajectory.X, g, strict=True):
        writer.writerow([_cell(float(v), digits) for v in row])


def dump_estimate(record: EstimateRecord, stream: TextIO, digits: int | None = None) -> None:
    """Write one record under the RECORD_COLUMNS header."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    writer.writerow(_cell(value, digits) for value in record.to_row())


class CsvTrajectoryStore(ITrajectoryWriter, ITrajectoryReader):
    """Trajectory CSV: a '# {json}' provenance line, then columns t, X, G."""

    def write_trajectory(self, trajectory: Trajectory, path: Path) -> None:
        """Write a trajectory with its provenance header.

        Raises:
            StorageError: If writing fails
        """
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as f:
                dump_trajectory(trajectory, f)
        except OSError as e:
            raise StorageError(f"Failed to write trajectory to {path}: {e}") from e

    def write_estimate(self, record: EstimateRecord, path: Path) -> None:
        """Write one record as a two-line CSV.

        Raises:
            StorageError: If writing fails
        """
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as f:
                dump_estimate(record, f)
        except OSError as e:
            raise StorageError(f"Failed to write estimate to {path}: {e}") from e

    def read_trajectory(self, path: Path) -> Trajectory:
        """Read a trajectory CSV written by write_trajectory.

        Raises:
            StorageError: If the file is missing or malformed
        """
        try:
            with path.open(newline="") as f:
                first = f.readline()
                if not first.startswith(HEADER_PREFIX):
                    raise StorageError(f"{path}: missing JSON header line")
                header = json.loads(first[len(HEADER_PREFIX) :])
                reader = csv.reader(f)
                columns = next(reader)
                if tuple(columns) != TRAJECTORY_COLUMNS:
                    raise StorageError(
                        f"{path}: expected columns {TRAJECTORY_COLUMNS}, got {columns}"
                    )
                data = np.array([[float(v) for v in row] for row in reader if row])
        except OSError as e:
            raise StorageError(f"Failed to read trajectory from {path}: {e}") from e
        except (ValueError, StopIteration) as e:
            raise StorageError(f"Malformed trajectory file {path}: {e}") from e

        try:
            return _trajectory_from(header, data)
        except (GfouError, KeyError, ValueError) as e:
            raise StorageError(f"Malformed trajectory file {path}: {e}") from e


def _trajectory_from(header: dict[str, Any], data: FloatArray) -> Trajectory:
    raw_seed = header["seed"]
    seed: Seed = tuple(int(p) for p in raw_seed) if isinstance(raw_seed, list) else int(raw_seed)
    n = data.shape[0] - 1
    grid = GridSpec(T=float(header.get("T", data[-1, 0])), n=int(header.get("n", n)))
    if grid.n != n:
        raise ValueError(f"Header says n={grid.n} but the file has {n + 1} rows")
    model = CovarianceModel.from_dict(header["model"])
    noise = None
    if np.all(np.isfinite(data[:, 2])):
        noise = GaussianPath(grid=grid, increments=np.diff(data[:, 2]), path=data[:, 2], seed=seed)
    return Trajectory(
        grid=grid,
        X=data[:, 1].copy(),
        model=model,
        theta=float(header["theta"]),
        sigma=float(header["sigma"]),
        seed=seed,
        noise=noise,
        x0=float(header.get("x0", data[0, 1])),
    )
