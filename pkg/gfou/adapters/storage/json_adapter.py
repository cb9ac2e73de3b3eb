"""JSON storage: summaries, runtime metadata, reports and single documents."""

import json
import logging
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from gfou.domain.entities import EstimateRecord, McSummary, OracleReport, Trajectory
from gfou.domain.exceptions import StorageError
from gfou.domain.ports import ISummaryWriter, ITrajectoryWriter

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
RUNTIME_FILE = "runtime.json"
REPORTS_FILE = "reports.json"


def trajectory_document(trajectory: Trajectory) -> dict[str, Any]:
    """Header plus the t, X and G arrays (G is null when the noise is unknown)."""
    return {
        "header": trajectory.header(),
        "t": trajectory.times,
        "X": trajectory.X,
        "G": trajectory.noise.path if trajectory.noise is not None else None,
    }


def to_jsonable(value: Any) -> Any:
    """Replace NaN and infinities by None and numpy scalars or arrays by Python values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(value: Any) -> str:
    """Deterministic, strict JSON text."""
    return json.dumps(to_jsonable(value), indent=2, allow_nan=False) + "\n"


def write_json(value: Any, path: Path) -> Path:
    """Write value as JSON to path.

    Raises:
        StorageError: If writing fails
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(value))
    except (OSError, TypeError, ValueError) as e:
        raise StorageError(f"Failed to write {path}: {e}") from e
    logger.debug("Wrote %s", path)
    return path


class JsonSummaryWriter(ISummaryWriter):
    """Writes summary.json, runtime.json and reports.json into one directory."""

    def __init__(self, out_dir: Path) -> None:
        """Initialize the writer.

        Args:
            out_dir: Output directory
        """
        self.out_dir = out_dir

    def write_summary(self, summary: McSummary) -> Path:
        """Write the deterministic summary."""
        return write_json(summary.to_dict(), self.out_dir / SUMMARY_FILE)

    def write_runtime(self, runtime: dict[str, Any]) -> Path:
        """Write wall-clock metadata."""
        return write_json(runtime, self.out_dir / RUNTIME_FILE)

    def write_reports(self, reports: Sequence[OracleReport]) -> Path:
        """Write oracle reports as a JSON array."""
        return write_json([r.to_dict() for r in reports], self.out_dir / REPORTS_FILE)


class JsonTrajectoryWriter(ITrajectoryWriter):
    """Trajectory and estimate documents for --format json."""

    def write_trajectory(self, trajectory: Trajectory, path: Path) -> None:
        """Write header plus t, X, G arrays."""
        write_json(trajectory_document(trajectory), path)

    def write_estimate(self, record: EstimateRecord, path: Path) -> None:
        """Write one record as a JSON object."""
        write_json(record.to_dict(), path)
