"""YAML configuration repository adapter (JSON documents parse as YAML too)."""

from pathlib import Path
from typing import Any

import yaml

from gfou.domain.exceptions import ConfigError
from gfou.domain.ports import IConfigRepository


class YAMLConfigRepository(IConfigRepository):
    """Adapter for reading configuration from YAML or JSON files."""

    def __init__(self, config_file: Path) -> None:
        """Initialize the YAML config repository.

        Args:
            config_file: Path to the configuration file
        """
        self.config_file = config_file

    async def load(self) -> dict[str, Any]:
        """Load configuration from the file.

        Returns:
            dict: Configuration dictionary (empty when the file is missing or empty)

        Raises:
            ConfigError: If the file cannot be parsed or is not a mapping
        """
        if not self.config_file.exists():
            return {}
        try:
            with self.config_file.open() as f:
                config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Failed to parse config {self.config_file}: {e}") from e
        except OSError as e:
            raise ConfigError(f"Failed to load config from {self.config_file}: {e}") from e
        if config is None:
            return {}
        if not isinstance(config, dict):
            raise ConfigError(
                f"Config {self.config_file} must be a mapping, got {type(config).__name__}"
            )
        return config

    async def exists(self) -> bool:
        """Check if the configuration file exists.

        Returns:
            bool: True if the file exists
        """
        return self.config_file.exists()
