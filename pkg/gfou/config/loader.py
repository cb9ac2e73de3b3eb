"""Configuration loader with precedence support."""

import os
from dataclasses import asdict
from pathlib import Path
from typing import Any

from gfou.adapters.config.yaml_adapter import YAMLConfigRepository
from gfou.config.config import (
    Config,
    ExperimentSettings,
    QuadratureConfig,
    SimulationConfig,
    SystemConfig,
)
from gfou.domain.exceptions import ConfigError

ENV_PREFIX = "GFOU_"

# Top-level environment shortcuts
ENV_ALIASES = {"threads": ("system", "threads")}


class ConfigLoader:
    """Loads configuration with precedence: defaults → file → CLI → env."""

    def __init__(self, config_file: Path | None = None) -> None:
        """Initialize the config loader.

        Args:
            config_file: Path to a YAML or JSON configuration file (None for defaults only)
        """
        self.config_file = config_file
        self.repo = YAMLConfigRepository(config_file) if config_file is not None else None

    async def load(
        self,
        cli_overrides: dict[str, Any] | None = None,
        env_overrides: dict[str, Any] | None = None,
    ) -> Config:
        """Load configuration with all precedence layers.

        Args:
            cli_overrides: Overrides from CLI arguments
            env_overrides: Overrides from an explicit environment mapping

        Returns:
            Config: Loaded and validated configuration

        Raises:
            ConfigError: If configuration is invalid
        """
        config_dict = self._config_to_dict(Config.default())

        if self.repo is not None and await self.repo.exists():
            config_dict = self._deep_merge(config_dict, await self.repo.load())

        try:
            config = self._dict_to_config(config_dict)
            for layer in (cli_overrides, env_overrides, self._load_from_env()):
                if layer:
                    config = config.merge_with_overrides(layer)
            config.validate()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        return config

    def _deep_merge(self, base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
        """Deep merge two dictionaries, override winning."""
        result = base.copy()
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._deep_merge(result[key], value)
            else:
                result[key] = value
        return result

    def _config_to_dict(self, config: Config) -> dict[str, Any]:
        return {
            "quadrature": asdict(config.quadrature),
            "simulation": asdict(config.simulation),
            "experiment": asdict(config.experiment),
            "system": {
                **asdict(config.system),
                "log_file": str(config.system.log_file) if config.system.log_file else None,
            },
        }

    def _dict_to_config(self, config_dict: dict[str, Any]) -> Config:
        unknown = set(config_dict) - {"quadrature", "simulation", "experiment", "system"}
        if unknown:
            raise ValueError(f"Unknown config sections: {sorted(unknown)}")
        system = dict(config_dict.get("system", {}))
        if system.get("log_file") is not None:
            system["log_file"] = Path(system["log_file"])
        return Config(
            quadrature=QuadratureConfig(**config_dict.get("quadrature", {})),
            simulation=SimulationConfig(**config_dict.get("simulation", {})),
            experiment=ExperimentSettings(**config_dict.get("experiment", {})),
            system=SystemConfig(**system),
        )

    def _load_from_env(self) -> dict[str, Any]:
        """Load configuration overrides from environment variables.

        Variables are prefixed with GFOU_ and use double underscores for nesting:
        - GFOU_QUADRATURE__RTOL=1e-8
        - GFOU_SYSTEM__LOG_LEVEL=DEBUG
        - GFOU_THREADS=4 (shortcut for system.threads)

        Returns:
            dict: Configuration overrides from environment
        """
        config_dict: dict[str, Any] = {}
        for key, value in os.environ.items():
            if not key.startswith(ENV_PREFIX):
                continue
            key_parts = key[len(ENV_PREFIX) :].lower().split("__")
            if len(key_parts) == 1 and key_parts[0] in ENV_ALIASES:
                key_parts = list(ENV_ALIASES[key_parts[0]])
            if len(key_parts) == 2:
                section, option = key_parts
                config_dict.setdefault(section, {})[option] = self._parse_env_value(value)
        return config_dict

    def _parse_env_value(self, value: str) -> Any:
        """Parse an environment value to bool, None, int, float or str."""
        lowered = value.lower()
        if lowered in ("true", "yes"):
            return True
        if lowered in ("false", "no"):
            return False
        if lowered in ("none", "null", ""):
            return None
        try:
            if any(c in lowered for c in ".e"):
                return float(value)
            return int(value)
        except ValueError:
            return value
