"""Unit tests for domain entities."""

from pathlib import Path

import numpy as np
import pytest

from gfou.domain.covariance import CovarianceModel
from gfou.domain.entities import (
    ESTIMATORS,
    EstimateRecord,
    ExperimentConfig,
    GaussianPath,
    GridSpec,
    OracleReport,
    OracleStatus,
    ReplicationRecord,
    Trajectory,
)


def _record(T: float = 4.0) -> EstimateRecord:
    return EstimateRecord(
        seed=(1, 0, 2),
        T=T,
        n=80,
        H=0.3,
        theta_true=1.0,
        theta_tilde=1.1,
        theta_hat_naive=0.9,
        theta_hat_skorohod=1.05,
        int_x2=0.4,
        model="fbm(H=0.3)",
    )


class TestGridSpec:
    """Tests for GridSpec."""

    def test_nodes_and_midpoints(self) -> None:
        """n + 1 nodes and n midpoints."""
        grid = GridSpec(2.0, 4)
        np.testing.assert_allclose(grid.times, [0.0, 0.5, 1.0, 1.5, 2.0])
        np.testing.assert_allclose(grid.midpoints, [0.25, 0.75, 1.25, 1.75])
        assert grid.dt == 0.5

    def test_from_horizon(self) -> None:
        """n = steps_per_unit_time * T, at least 2."""
        assert GridSpec.from_horizon(5.0, 20.0).n == 100
        assert GridSpec.from_horizon(0.01, 20.0).n == 2

    @pytest.mark.parametrize(("T", "n"), [(0.0, 10), (-1.0, 10), (float("inf"), 10), (1.0, 1)])
    def test_invalid(self, T: float, n: int) -> None:
        """Non-positive horizons and fewer than two steps are rejected."""
        with pytest.raises(ValueError, match="Invalid"):
            GridSpec(T, n)


class TestPathsAndTrajectories:
    """Tests for path and trajectory validation."""

    def test_path_must_start_at_zero(self) -> None:
        """G_0 = 0."""
        grid = GridSpec(1.0, 2)
        with pytest.raises(ValueError, match="start at 0"):
            GaussianPath(grid, np.ones(2), np.array([1.0, 2.0, 3.0]), seed=0)

    def test_trajectory_checks(self) -> None:
        """Length, initial value and parameters are validated."""
        grid = GridSpec(1.0, 2)
        model = CovarianceModel.fbm(0.3)
        with pytest.raises(ValueError, match="Invalid X length"):
            Trajectory(grid, np.zeros(2), model, 1.0, 1.0, 0)
        with pytest.raises(ValueError, match="x0"):
            Trajectory(grid, np.ones(3), model, 1.0, 1.0, 0)
        with pytest.raises(ValueError, match="Invalid theta"):
            Trajectory(grid, np.zeros(3), model, -1.0, 1.0, 0)

    def test_noise_scale_and_header(self) -> None:
        """noise_scale is sigma^2 times the principal coefficient."""
        grid = GridSpec(1.0, 2)
        model = CovarianceModel.bifbm(0.6, 0.5)
        traj = Trajectory(grid, np.zeros(3), model, 1.0, 2.0, (1, 2, 3))
        assert traj.noise_scale == pytest.approx(4.0 * 2**0.5)
        header = traj.header()
        assert header["seed"] == [1, 2, 3]
        assert header["model"] == model.to_dict()


class TestRecords:
    """Tests for estimate and replication records."""

    def test_row_order(self) -> None:
        """Rows follow the record columns, seeds joined with dashes."""
        row = _record().to_row()
        assert row[0] == "1-0-2"
        assert row[5:8] == [1.1, 0.9, 1.05]
        assert _record().to_dict()["model"] == "fbm(H=0.3)"

    def test_q_t(self) -> None:
        """Q_T = (F_T - J_T) / sqrt(T)."""
        rep = ReplicationRecord(replication=2, estimate=_record(T=4.0), f_t=3.0, j_t=1.0)
        assert rep.q_t == pytest.approx(1.0)
        assert rep.to_row()[-1] == pytest.approx(1.0)

    def test_oracle_report(self) -> None:
        """Only PASS counts as passed."""
        report = OracleReport("x", "r", (1.0,), (2.0,), None, 0.0, OracleStatus.INCONCLUSIVE)
        assert not report.passed
        assert report.to_dict()["status"] == "inconclusive"


class TestExperimentConfig:
    """Tests for experiment descriptions."""

    def test_from_dict(self) -> None:
        """Defaults fill in and H follows the model."""
        config = ExperimentConfig.from_dict(
            {
                "model": {"family": "subfbm", "H": 0.3},
                "theta_true": 1.0,
                "T_list": [10, 20],
                "n_reps": 50,
                "master_seed": 7,
            }
        )
        assert config.T_list == (10.0, 20.0)
        assert config.estimators == ESTIMATORS
        assert config.output == Path("results")
        assert config.hurst == pytest.approx(0.3)
        assert config.to_dict()["H"] == pytest.approx(0.3)

    def test_unknown_keys(self) -> None:
        """Typos are rejected."""
        with pytest.raises(ValueError, match="Unknown experiment config keys"):
            ExperimentConfig.from_dict(
                {
                    "model": {"family": "fbm", "H": 0.3},
                    "theta_true": 1.0,
                    "T_list": [10],
                    "n_reps": 5,
                    "master_seed": 1,
                    "reps": 5,
                }
            )

    @pytest.mark.parametrize(
        "overrides",
        [
            {"n_reps": 0},
            {"T_list": ()},
            {"T_list": (20.0, 10.0)},
            {"theta_true": 0.0},
            {"sigma": -1.0},
            {"H": 1.0},
            {"estimators": ("mle",)},
            {"threads": 0},
        ],
    )
    def test_invalid(self, overrides: dict[str, object]) -> None:
        """Out-of-range parameters are rejected."""
        params: dict[str, object] = {
            "model": CovarianceModel.fbm(0.3),
            "theta_true": 1.0,
            "T_list": (10.0,),
            "n_reps": 5,
            "master_seed": 1,
        }
        params.update(overrides)
        with pytest.raises(ValueError):
            ExperimentConfig(**params)  # type: ignore[arg-type]
