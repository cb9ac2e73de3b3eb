"""Core domain entities for the gfou toolkit."""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import numpy.typing as npt

if TYPE_CHECKING:
    from gfou.domain.covariance import CovarianceModel

FloatArray = npt.NDArray[np.float64]
Seed = int | tuple[int, ...]

ESTIMATORS = ("me", "lse_naive", "lse_skorohod")

RECORD_COLUMNS = (
    "seed",
    "T",
    "n",
    "H",
    "theta_true",
    "theta_tilde",
    "theta_hat_naive",
    "theta_hat_skorohod",
    "int_x2",
)


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid t_i = i T / n on [0, T]."""

    T: float  # Horizon
    n: int  # Number of steps

    def __post_init__(self) -> None:
        """Validate grid parameters."""
        if not np.isfinite(self.T) or self.T <= 0:
            raise ValueError(f"Invalid T: {self.T}")
        if self.n < 2:
            raise ValueError(f"Invalid n: {self.n} (need n >= 2)")

    @classmethod
    def from_horizon(cls, T: float, steps_per_unit_time: float = 20.0) -> "GridSpec":
        """Grid with n = steps_per_unit_time * T steps."""
        return cls(T=T, n=max(2, round(T * steps_per_unit_time)))

    @property
    def dt(self) -> float:
        """Spacing T / n."""
        return self.T / self.n

    @property
    def times(self) -> FloatArray:
        """The n + 1 nodes."""
        return np.arange(self.n + 1, dtype=np.float64) * self.T / self.n

    @property
    def midpoints(self) -> FloatArray:
        """Cell midpoints t_i* = (t_i + t_{i+1}) / 2."""
        return (np.arange(self.n, dtype=np.float64) + 0.5) * self.T / self.n


@dataclass(frozen=True, eq=False)
class IncrementGram:
    """Covariance of the increments of G on a grid and its Cholesky factor."""

    grid: GridSpec
    C: FloatArray  # C_ij = Cov(dG_i, dG_j)
    chol: FloatArray  # Lower triangular, C ~ chol chol^T
    jitter: float  # Diagonal jitter that made the factorization succeed (0 if none)
    model: "CovarianceModel"

    def __post_init__(self) -> None:
        """Validate matrix shapes."""
        shape = (self.grid.n, self.grid.n)
        if self.C.shape != shape or self.chol.shape != shape:
            raise ValueError(f"Invalid gram shape: {self.C.shape}, expected {shape}")
        if self.jitter < 0:
            raise ValueError(f"Invalid jitter: {self.jitter}")

    @cached_property
    def superdiagonal_sums(self) -> FloatArray:
        """S_d = sum_i C_(i, i+d) for d = 1..n-1."""
        return np.array([np.trace(self.C, offset=d) for d in range(1, self.grid.n)])


@dataclass(frozen=True, eq=False)
class GaussianPath:
    """Sampled increments of G and the cumulative path."""

    grid: GridSpec
    increments: FloatArray  # dG_i, n values
    path: FloatArray  # G at the nodes, n + 1 values, path[0] = 0
    seed: Seed

    def __post_init__(self) -> None:
        """Validate path consistency."""
        if self.increments.shape != (self.grid.n,):
            raise ValueError(f"Invalid increments length: {self.increments.shape}")
        if self.path.shape != (self.grid.n + 1,):
            raise ValueError(f"Invalid path length: {self.path.shape}")
        if self.path[0] != 0.0:
            raise ValueError(f"Path must start at 0, got {self.path[0]}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """OU sample path dX = -theta X dt + sigma dG on a grid, with provenance."""

    grid: GridSpec
    X: FloatArray  # n + 1 values
    model: "CovarianceModel"
    theta: float
    sigma: float
    seed: Seed
    noise: GaussianPath | None = None  # Driving path, when simulated here
    x0: float = 0.0  # Initial condition

    def __post_init__(self) -> None:
        """Validate trajectory values."""
        if self.X.shape != (self.grid.n + 1,):
            raise ValueError(f"Invalid X length: {self.X.shape}")
        if self.X[0] != self.x0:
            raise ValueError(f"X[0] must equal x0={self.x0}, got {self.X[0]}")
        if not np.isfinite(self.theta) or self.theta <= 0:
            raise ValueError(f"Invalid theta: {self.theta}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"Invalid sigma: {self.sigma}")

    @property
    def times(self) -> FloatArray:
        """Grid nodes."""
        return self.grid.times

    @property
    def noise_scale(self) -> float:
        """sigma**2 times the principal coefficient of the noise covariance."""
        return self.sigma**2 * self.model.principal_scale

    def header(self) -> dict[str, Any]:
        """Provenance header written above exported trajectories."""
        return {
            "model": self.model.to_dict(),
            "theta": self.theta,
            "sigma": self.sigma,
            "seed": list(self.seed) if isinstance(self.seed, tuple) else self.seed,
            "T": self.grid.T,
            "n": self.grid.n,
            "x0": self.x0,
        }


@dataclass(frozen=True)
class EstimateRecord:
    """Estimator outputs for one trajectory."""

    seed: Seed
    T: float
    n: int
    H: float
    theta_true: float | None
    theta_tilde: float  # Moment estimator
    theta_hat_naive: float  # Pathwise least squares
    theta_hat_skorohod: float  # Two-stage corrected least squares
    int_x2: float  # (1/T) int X^2 dt
    model: str = ""  # Model descriptor

    def __post_init__(self) -> None:
        """Validate record values."""
        if self.int_x2 > 0 and not (np.isnan(self.theta_tilde) or self.theta_tilde > 0):
            raise ValueError(f"Invalid theta_tilde: {self.theta_tilde}")

    def to_row(self) -> list[Any]:
        """Values in RECORD_COLUMNS order."""
        seed = "-".join(str(p) for p in self.seed) if isinstance(self.seed, tuple) else self.seed
        return [
            seed,
            self.T,
            self.n,
            self.H,
            self.theta_true,
            self.theta_tilde,
            self.theta_hat_naive,
            self.theta_hat_skorohod,
            self.int_x2,
        ]

    def to_dict(self) -> dict[str, Any]:
        """Column name to value, plus the model descriptor."""
        return {**dict(zip(RECORD_COLUMNS, self.to_row(), strict=True)), "model": self.model}


@dataclass(frozen=True)
class AsymptoticConstants:
    """Limiting variances and the Berry-Esseen exponent."""

    theta: float
    H: float
    sigma_H2: float
    lse_var: float  # theta * sigma_H2
    me_var: float  # theta * sigma_H2 / (4 H^2)
    delta: float | None  # None outside (0, 3/8)
    h_quarter_flag: bool  # Log-factor regime at H = 1/4

    def to_dict(self) -> dict[str, Any]:
        """Serialize for output."""
        return {
            "theta": self.theta,
            "H": self.H,
            "sigma_H2": self.sigma_H2,
            "lse_var": self.lse_var,
            "me_var": self.me_var,
            "delta": self.delta,
            "h_quarter_flag": self.h_quarter_flag,
        }


class OracleStatus(Enum):
    """Outcome of one oracle item."""

    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"  # Slope fit too poor to decide
    SKIPPED = "skipped"  # Outside the hypothesis range of the checked statement
    ERROR = "error"  # Numerical failure while evaluating


@dataclass(frozen=True)
class OracleReport:
    """Result of checking one limit or bound on a grid of T (or s) values."""

    name: str
    relation: str  # Human readable statement of what was checked
    grid: tuple[float, ...]
    values: tuple[float, ...]
    reference: float | None
    tolerance: float
    status: OracleStatus
    slope: float | None = None
    r2: float | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        """True only for PASS."""
        return self.status is OracleStatus.PASS

    def to_dict(self) -> dict[str, Any]:
        """Serialize for JSON output."""
        return {
            "name": self.name,
            "relation": self.relation,
            "grid": list(self.grid),
            "values": list(self.values),
            "reference": self.reference,
            "tolerance": self.tolerance,
            "status": self.status.value,
            "pass": self.passed,
            "slope": self.slope,
            "r2": self.r2,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte Carlo experiment description, usually read from a JSON file."""

    model: "CovarianceModel"
    theta_true: float
    T_list: tuple[float, ...]
    n_reps: int
    master_seed: int
    H: float | None = None  # Defaults to the model's effective exponent
    sigma: float = 1.0
    steps_per_unit_time: float = 20.0
    estimators: tuple[str, ...] = ESTIMATORS
    output: Path = field(default_factory=lambda: Path("results"))
    threads: int | None = None

    def __post_init__(self) -> None:
        """Validate experiment parameters."""
        if self.n_reps < 1:
            raise ValueError(f"n_reps must be >= 1, got {self.n_reps}")
        if not self.T_list:
            raise ValueError("T_list cannot be empty")
        if any(b <= a for a, b in zip(self.T_list, self.T_list[1:], strict=False)):
            raise ValueError(f"T_list must be strictly ascending, got {self.T_list}")
        if self.T_list[0] <= 0:
            raise ValueError(f"Invalid T: {self.T_list[0]}")
        if not np.isfinite(self.theta_true) or self.theta_true <= 0:
            raise ValueError(f"Invalid theta_true: {self.theta_true}")
        if self.sigma <= 0:
            raise ValueError(f"Invalid sigma: {self.sigma}")
        if self.steps_per_unit_time <= 0:
            raise ValueError(f"Invalid steps_per_unit_time: {self.steps_per_unit_time}")
        if self.H is not None and not 0.0 < self.H < 1.0:
            raise ValueError(f"Invalid H: {self.H}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ValueError(f"Invalid estimators: {self.estimators}. Must be from {ESTIMATORS}")
        if self.threads is not None and self.threads < 1:
            raise ValueError(f"Invalid threads: {self.threads}")

    @property
    def hurst(self) -> float:
        """H handed to the estimators."""
        return self.model.hurst_eff if self.H is None else self.H

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        """Build from a parsed JSON document.

        Raises:
            KeyError: If a required field is missing
            ValueError: If a value is invalid
            InvalidModelError: If the model description is invalid
        """
        from gfou.domain.covariance import CovarianceModel

        known = {
            "model",
            "theta_true",
            "T_list",
            "n_reps",
            "master_seed",
            "H",
            "sigma",
            "steps_per_unit_time",
            "estimators",
            "output",
            "threads",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown experiment config keys: {sorted(unknown)}")

        return cls(
            model=CovarianceModel.from_dict(data["model"]),
            theta_true=float(data["theta_true"]),
            T_list=tuple(float(t) for t in data["T_list"]),
            n_reps=int(data["n_reps"]),
            master_seed=int(data["master_seed"]),
            H=None if data.get("H") is None else float(data["H"]),
            sigma=float(data.get("sigma", 1.0)),
            steps_per_unit_time=float(data.get("steps_per_unit_time", 20.0)),
            estimators=tuple(data.get("estimators", ESTIMATORS)),
            output=Path(data.get("output", "results")),
            threads=None if data.get("threads") is None else int(data["threads"]),
        )

    def to_dict(self) -> dict[str, Any]:
        """Serialize, output path as string."""
        return {
            "model": self.model.to_dict(),
            "theta_true": self.theta_true,
            "T_list": list(self.T_list),
            "n_reps": self.n_reps,
            "master_seed": self.master_seed,
            "H": self.hurst,
            "sigma": self.sigma,
            "steps_per_unit_time": self.steps_per_unit_time,
            "estimators": list(self.estimators),
            "output": str(self.output),
        }


@dataclass(frozen=True)
class ReplicationRecord:
    """One Monte Carlo replication: estimates plus the true-theta chaos statistics."""

    replication: int
    estimate: EstimateRecord
    f_t: float  # F_T = I_2(f_T)
    j_t: float  # J_T = I_2(h_T)

    @property
    def q_t(self) -> float:
        """Q_T = (F_T - J_T) / sqrt(T)."""
        return (self.f_t - self.j_t) / float(np.sqrt(self.estimate.T))

    def to_row(self) -> list[Any]:
        """Record row with the q_T column appended."""
        return [*self.estimate.to_row(), self.q_t]


@dataclass(frozen=True)
class EstimatorStats:
    """Aggregates of one estimator over the replications of one T-cell."""

    mean: float
    median: float
    variance: float
    variance_se: float  # Jackknife standard error of the variance
    median_abs_error: float  # median |theta_hat - theta_true|
    scaled_variance: float  # Var(sqrt(T)(theta_hat - theta_true))
    scaled_variance_se: float
    target_variance: float | None  # Limiting variance, when defined
    ks: float | None  # KS distance to N(0, target), None when not computable

    def __post_init__(self) -> None:
        """Validate statistics."""
        if self.variance < 0 or self.scaled_variance < 0:
            raise ValueError("Variances must be >= 0")
        if self.ks is not None and not 0.0 <= self.ks <= 1.0:
            raise ValueError(f"Invalid KS distance: {self.ks}")


@dataclass(frozen=True)
class ChaosStats:
    """Aggregates of Q_T = (F_T - J_T)/sqrt(T) over one T-cell."""

    variance: float
    variance_se: float
    f_variance: float  # Var(F_T)
    f_variance_se: float
    target_variance_a: float | None  # 4 theta a^2 sigma_H^2
    target_variance_b: float | None  # 4 theta b_T^2 sigma_H^2
    ks_a: float | None
    ks_b: float | None


@dataclass(frozen=True)
class CellSummary:
    """Statistics for one horizon T."""

    T: float
    n: int
    replications: int  # Successful replications
    failures: int
    small_sample: bool
    b_T: float | None
    estimators: dict[str, EstimatorStats]
    chaos: ChaosStats

    def to_dict(self) -> dict[str, Any]:
        """Serialize for summary.json."""
        return {
            "T": self.T,
            "n": self.n,
            "replications": self.replications,
            "failures": self.failures,
            "small_sample": self.small_sample,
            "b_T": self.b_T,
            "estimators": {name: vars(stats) for name, stats in self.estimators.items()},
            "chaos": vars(self.chaos),
        }


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log y against log T."""

    slope: float
    r2: float


@dataclass(frozen=True)
class McSummary:
    """Aggregated Monte Carlo statistics for a whole experiment."""

    config: ExperimentConfig
    cells: tuple[CellSummary, ...]
    rate_fits: dict[str, RateFit | None]  # KS-vs-T slope per statistic
    runtime: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def failures(self) -> int:
        """Total failed replications."""
        return sum(cell.failures for cell in self.cells)

    def to_dict(self) -> dict[str, Any]:
        """Deterministic part of the summary (runtime metadata excluded)."""
        return {
            "config": self.config.to_dict(),
            "cells": [cell.to_dict() for cell in self.cells],
            "rate_fits": {
                key: None if fit is None else {"slope": fit.slope, "r2": fit.r2}
                for key, fit in self.rate_fits.items()
            },
            "failures": self.failures,
        }
