"""Configuration management for gfou."""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from gfou.domain.quadrature import Tolerance


@dataclass
class QuadratureConfig:
    """Settings of the adaptive quadrature engine."""

    rtol: float = 1e-6  # Relative tolerance of 1-D and 2-D integrals
    atol: float = 1e-12
    max_depth: int = 18  # Bisection depth cap
    order: int = 10  # Gauss-Legendre points per panel
    debug_panels: bool = False  # Dump accepted panel trees with quadrature results

    @property
    def tolerance(self) -> Tolerance:
        return Tolerance(
            self.rtol, self.atol, self.max_depth, self.order, record_panels=self.debug_panels
        )


@dataclass
class SimulationConfig:
    """Grid and Cholesky settings."""

    steps_per_unit_time: float = 20.0  # n = steps_per_unit_time * T
    jitter_start: float = 1e-12  # Relative diagonal jitter of the first retry
    jitter_max: float = 1e-8  # Largest relative jitter before giving up


@dataclass
class ExperimentSettings:
    """Monte Carlo policy."""

    failure_cap: float = 0.01  # Largest tolerated fraction of failed replications
    small_sample: int = 20  # Cells with fewer replications get no KS distance
    contraction_max_cells: int = 2400  # Cell budget of contraction norms


@dataclass
class SystemConfig:
    """System-level configuration."""

    threads: int | None = None  # Worker cap (None for all cores)
    log_level: str = "INFO"  # Log level: DEBUG, INFO, WARNING, ERROR
    log_file: Path | None = None  # Log file path (None for stderr only)


@dataclass
class Config:
    """Main configuration container."""

    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    system: SystemConfig = field(default_factory=SystemConfig)

    @classmethod
    def default(cls) -> "Config":
        """Create a configuration with all default values."""
        return cls()

    def validate(self) -> None:
        """Validate configuration values.

        Raises:
            ValueError: If any configuration value is invalid
        """
        q = self.quadrature
        if not 0 < q.rtol < 1:
            raise ValueError(f"rtol must be in (0, 1), got {q.rtol}")
        if q.atol < 0:
            raise ValueError(f"atol must be >= 0, got {q.atol}")
        if q.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {q.max_depth}")
        if q.order < 2:
            raise ValueError(f"order must be >= 2, got {q.order}")

        s = self.simulation
        if s.steps_per_unit_time <= 0:
            raise ValueError(f"steps_per_unit_time must be > 0, got {s.steps_per_unit_time}")
        if not 0 < s.jitter_start <= s.jitter_max:
            raise ValueError(
                f"Need 0 < jitter_start <= jitter_max, got {s.jitter_start}, {s.jitter_max}"
            )

        e = self.experiment
        if not 0 <= e.failure_cap < 1:
            raise ValueError(f"failure_cap must be in [0, 1), got {e.failure_cap}")
        if e.small_sample < 1:
            raise ValueError(f"small_sample must be >= 1, got {e.small_sample}")
        if e.contraction_max_cells < 8:
            raise ValueError(
                f"contraction_max_cells must be >= 8, got {e.contraction_max_cells}"
            )

        if self.system.threads is not None and self.system.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.system.threads}")
        valid_log_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        if self.system.log_level.upper() not in valid_log_levels:
            raise ValueError(
                f"Invalid log_level: {self.system.log_level}. Must be one of {valid_log_levels}"
            )

    def merge_with_overrides(self, overrides: dict[str, Any]) -> "Config":
        """Create a new config with per-section overrides applied and validated.

        Args:
            overrides: Section name to field overrides

        Returns:
            Config: New config with overrides applied

        Raises:
            ValueError: On unknown sections or out-of-range values
            TypeError: On unknown fields
        """
        unknown = set(overrides) - {"quadrature", "simulation", "experiment", "system"}
        if unknown:
            raise ValueError(f"Unknown config sections: {sorted(unknown)}")
        system = dict(overrides.get("system", {}))
        if system.get("log_file") is not None:
            system["log_file"] = Path(system["log_file"])
        new_config = Config(
            quadrature=replace(self.quadrature, **overrides.get("quadrature", {})),
            simulation=replace(self.simulation, **overrides.get("simulation", {})),
            experiment=replace(self.experiment, **overrides.get("experiment", {})),
            system=replace(self.system, **system),
        )
        new_config.validate()
        return new_config
