"""Unit tests for the plot data writer."""

import csv
from pathlib import Path

import pytest

from gfou.adapters.storage.plotdata_adapter import TsvPlotDataWriter
from gfou.domain.covariance import CovarianceModel
from gfou.domain.entities import (
    CellSummary,
    ChaosStats,
    EstimatorStats,
    ExperimentConfig,
    McSummary,
)


def _stats(ks: float | None) -> EstimatorStats:
    return EstimatorStats(
        mean=1.0,
        median=1.0,
        variance=0.1,
        variance_se=0.01,
        median_abs_error=0.2,
        scaled_variance=2.0,
        scaled_variance_se=0.3,
        target_variance=None if ks is None else 2.1,
        ks=ks,
    )


@pytest.fixture
def summary() -> McSummary:
    """Two cells, the second without a b_T normalization."""
    config = ExperimentConfig(
        model=CovarianceModel.fbm(0.3),
        theta_true=1.0,
        T_list=(10.0, 20.0),
        n_reps=50,
        master_seed=1,
        estimators=("me", "lse_naive"),
    )
    cells = tuple(
        CellSummary(
            T=T,
            n=int(20 * T),
            replications=50,
            failures=0,
            small_sample=False,
            b_T=0.4 if T == 10.0 else None,
            estimators={"me": _stats(0.05), "lse_naive": _stats(None)},
            chaos=ChaosStats(1.0, 0.1, 5.0, 0.5, 0.9, None if T == 20.0 else 0.8, 0.04, None),
        )
        for T in config.T_list
    )
    return McSummary(config=config, cells=cells, rate_fits={})


def _read(path: Path) -> list[list[str]]:
    with path.open(newline="") as f:
        return list(csv.reader(f, delimiter="\t"))


class TestTsvPlotDataWriter:
    """Tests for ks_vs_T.tsv and variance_vs_T.tsv."""

    def test_ks_table(self, tmp_path: Path, summary: McSummary) -> None:
        """One row per T, missing distances written as nan."""
        ks_path, _ = TsvPlotDataWriter(tmp_path / "plotdata").write(summary)
        rows = _read(ks_path)
        assert rows[0] == ["T", "ks_me", "ks_lse_naive", "ks_q_t_a", "ks_q_t_b"]
        assert rows[1] == ["10.0", "0.05", "nan", "0.04", "nan"]
        assert len(rows) == 3

    def test_variance_table(self, tmp_path: Path, summary: McSummary) -> None:
        """Scaled variances with their errors and targets."""
        _, var_path = TsvPlotDataWriter(tmp_path).write(summary)
        rows = _read(var_path)
        assert rows[0][:4] == ["T", "var_me", "var_me_se", "target_me"]
        assert rows[0][-4:] == ["var_q_t", "var_q_t_se", "target_q_t_a", "target_q_t_b"]
        assert rows[1][1:4] == ["2.0", "0.3", "2.1"]
        assert rows[2][-1] == "nan"
