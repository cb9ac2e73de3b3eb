"""Unit tests for the Monte Carlo runner."""

from collections.abc import Sequence
from typing import Any

import pytest

from gfou.domain.covariance import CovarianceModel
from gfou.domain.entities import ExperimentConfig, ReplicationRecord
from gfou.domain.exceptions import AccuracyError, DegenerateInputError, ExperimentError
from gfou.domain.ports import IRecordWriter
from gfou.domain.services import MonteCarloRunner


class MockRecordWriter(IRecordWriter):
    """Record writer that keeps the batches in memory."""

    def __init__(self) -> None:
        """Initialize an empty sink."""
        self.batches: list[list[ReplicationRecord]] = []

    def write(self, records: Sequence[ReplicationRecord]) -> None:
        """Keep one cell's records."""
        self.batches.append(list(records))


def _config(**overrides: Any) -> ExperimentConfig:
    params: dict[str, Any] = {
        "model": CovarianceModel.fbm(0.3),
        "theta_true": 1.0,
        "T_list": (1.0, 2.0, 4.0),
        "n_reps": 5,
        "master_seed": 42,
        "steps_per_unit_time": 10.0,
        "threads": 2,
    }
    params.update(overrides)
    return ExperimentConfig(**params)


class TestMonteCarloRunner:
    """Tests for running and aggregating experiments."""

    def test_small_run(self) -> None:
        """Cells come back in T order with every replication."""
        writer = MockRecordWriter()
        summary = MonteCarloRunner(record_writer=writer).run_experiment(_config())
        assert [cell.T for cell in summary.cells] == [1.0, 2.0, 4.0]
        assert [cell.n for cell in summary.cells] == [10, 20, 40]
        assert all(cell.replications == 5 and cell.failures == 0 for cell in summary.cells)
        assert summary.failures == 0
        assert len(writer.batches) == 3
        assert [rec.replication for rec in writer.batches[0]] == [0, 1, 2, 3, 4]
        assert summary.runtime["workers"] == 2

    def test_small_sample_has_no_ks(self) -> None:
        """Fewer than 20 replications flag the cell and skip KS distances."""
        summary = MonteCarloRunner().run_experiment(_config())
        cell = summary.cells[0]
        assert cell.small_sample
        assert cell.estimators["me"].ks is None
        assert cell.chaos.ks_a is None
        assert all(fit is None for fit in summary.rate_fits.values())

    def test_targets_and_ks(self) -> None:
        """With 20+ replications KS distances and rate fits are filled in."""
        summary = MonteCarloRunner().run_experiment(_config(n_reps=25))
        cell = summary.cells[-1]
        assert not cell.small_sample
        assert cell.b_T is not None and cell.b_T > 0
        for name in ("me", "lse_skorohod"):
            stats = cell.estimators[name]
            assert stats.target_variance is not None and stats.target_variance > 0
            assert stats.ks is not None
        assert cell.estimators["lse_naive"].target_variance is None
        assert cell.estimators["lse_naive"].ks is None
        assert cell.chaos.target_variance_a is not None
        assert cell.chaos.ks_b is not None
        assert set(summary.rate_fits) == {"me", "lse_skorohod", "q_t_a", "q_t_b"}
        assert summary.rate_fits["me"] is not None

    def test_no_targets_at_half(self) -> None:
        """H = 1/2 has no normal-limit constants; statistics remain."""
        summary = MonteCarloRunner().run_experiment(
            _config(model=CovarianceModel.fbm(0.5), n_reps=20, T_list=(2.0,))
        )
        cell = summary.cells[0]
        assert cell.estimators["me"].target_variance is None
        assert cell.estimators["me"].ks is None
        assert cell.chaos.target_variance_a is None
        assert cell.estimators["me"].scaled_variance > 0

    def test_deterministic(self) -> None:
        """Equal seeds give equal summaries; a new master seed changes them."""
        first = MonteCarloRunner().run_experiment(_config())
        second = MonteCarloRunner().run_experiment(_config(threads=1))
        third = MonteCarloRunner().run_experiment(_config(master_seed=43))
        assert first.to_dict()["cells"] == second.to_dict()["cells"]
        assert first.to_dict()["cells"] != third.to_dict()["cells"]

    def test_failure_cap(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """A cell losing more than the cap aborts the run."""

        def failing(*_args: Any, **_kwargs: Any) -> None:
            raise DegenerateInputError("zero path")

        monkeypatch.setattr("gfou.domain.services.estimate_all", failing)
        with pytest.raises(ExperimentError, match="replications failed"):
            MonteCarloRunner().run_experiment(_config())

    def test_failures_within_cap(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Isolated failures are dropped and counted."""
        from gfou.domain import services

        original = services.estimate_all

        def flaky(trajectory: Any, *args: Any, **kwargs: Any) -> Any:
            if trajectory.seed[2] == 0:
                raise DegenerateInputError("zero path")
            return original(trajectory, *args, **kwargs)

        monkeypatch.setattr("gfou.domain.services.estimate_all", flaky)
        writer = MockRecordWriter()
        runner = MonteCarloRunner(record_writer=writer, failure_cap=0.5)
        summary = runner.run_experiment(_config())
        assert all(cell.failures == 1 and cell.replications == 4 for cell in summary.cells)
        assert [rec.replication for rec in writer.batches[0]] == [1, 2, 3, 4]

    def test_b_t_failure_is_tolerated(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """An unconverged b_T drops the b_T normalization only."""

        def unconverged(*_args: Any, **_kwargs: Any) -> float:
            raise AccuracyError("b_T", estimate=0.4, error_bound=0.1)

        monkeypatch.setattr("gfou.domain.services.b_T", unconverged)
        summary = MonteCarloRunner().run_experiment(_config(n_reps=20, T_list=(2.0,)))
        cell = summary.cells[0]
        assert cell.b_T is None
        assert cell.chaos.target_variance_b is None
        assert cell.chaos.target_variance_a is not None

    def test_workers(self) -> None:
        """config.threads is capped by max_workers."""
        assert MonteCarloRunner(max_workers=2).workers(_config(threads=8)) == 2
        assert MonteCarloRunner().workers(_config(threads=3)) == 3
        assert MonteCarloRunner().workers(_config(threads=None)) >= 1

    def test_invalid_failure_cap(self) -> None:
        """The cap is a fraction in [0, 1)."""
        with pytest.raises(ValueError, match="Invalid failure_cap"):
            MonteCarloRunner(failure_cap=1.0)

    def test_summary_dict(self) -> None:
        """The summary serializes the config, cells and rate fits."""
        data = MonteCarloRunner().run_experiment(_config()).to_dict()
        assert data["config"]["master_seed"] == 42
        assert len(data["cells"]) == 3
        assert data["failures"] == 0
        assert "runtime" not in data
