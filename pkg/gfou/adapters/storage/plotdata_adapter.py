"""Tab-separated plot data: KS distance and variances against T."""

import csv
import logging
from pathlib import Path
from typing import Any

from gfou.domain.entities import McSummary
from gfou.domain.exceptions import StorageError
from gfou.domain.ports import IPlotDataWriter

logger = logging.getLogger(__name__)


def _cell(value: float | None) -> str:
    return "nan" if value is None else repr(float(value))


class TsvPlotDataWriter(IPlotDataWriter):
    """Writes plotdata/ks_vs_T.tsv and plotdata/variance_vs_T.tsv."""

    def __init__(self, out_dir: Path) -> None:
        """Initialize the writer.

        Args:
            out_dir: Directory receiving the .tsv files
        """
        self.out_dir = out_dir

    def write(self, summary: McSummary) -> list[Path]:
        """Write both tables.

        Raises:
            StorageError: If writing fails
        """
        estimators = list(summary.config.estimators)
        ks_header = ["T", *(f"ks_{name}" for name in estimators), "ks_q_t_a", "ks_q_t_b"]
        ks_rows = [
            [
                _cell(cell.T),
                *(_cell(cell.estimators[name].ks) for name in estimators),
                _cell(cell.chaos.ks_a),
                _cell(cell.chaos.ks_b),
            ]
            for cell in summary.cells
        ]

        var_header = ["T"]
        for name in estimators:
            var_header += [f"var_{name}", f"var_{name}_se", f"target_{name}"]
        var_header += ["var_q_t", "var_q_t_se", "target_q_t_a", "target_q_t_b"]
        var_rows = []
        for cell in summary.cells:
            row = [_cell(cell.T)]
            for name in estimators:
                stats = cell.estimators[name]
                row += [
                    _cell(stats.scaled_variance),
                    _cell(stats.scaled_variance_se),
                    _cell(stats.target_variance),
                ]
            chaos = cell.chaos
            row += [
                _cell(chaos.variance),
                _cell(chaos.variance_se),
                _cell(chaos.target_variance_a),
                _cell(chaos.target_variance_b),
            ]
            var_rows.append(row)

        return [
            self._write("ks_vs_T.tsv", ks_header, ks_rows),
            self._write("variance_vs_T.tsv", var_header, var_rows),
        ]

    def _write(self, name: str, header: list[str], rows: list[list[Any]]) -> Path:
        path = self.out_dir / name
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as f:
                writer = csv.writer(f, delimiter="\t", lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as e:
            raise StorageError(f"Failed to write plot data {path}: {e}") from e
        logger.debug("Wrote %s", path)
        return path
