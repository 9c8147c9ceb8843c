# app/core/config.py
import os
import json
import logging
from typing import Any, Dict, Mapping, Optional, Type

from dotenv import dotenv_values

from app.core.exceptions import DataFormatError
from app.utils import constants

logger = logging.getLogger(__name__)

ENV_PREFIX = "HEATCAST_"


class Config:
    """
    Layered application configuration.

    Sources, in increasing precedence: built-in defaults, the JSON file,
    an optional ``key = value`` file, ``HEATCAST_``-prefixed environment
    variables and explicit overrides (command-line flags). Keys are
    case-insensitive.
    """

    def __init__(self, config_file_path: Optional[str] = "config.json",
                 settings_path: Optional[str] = None,
                 overrides: Optional[Mapping[str, Any]] = None,
                 environ: Optional[Mapping[str, str]] = None):
        """
        Args:
            config_file_path (Optional[str]): JSON configuration file. Missing file is skipped.
            settings_path (Optional[str]): ``key = value`` text file (e.g. from ``--config``).
            overrides (Optional[Mapping]): Highest-precedence values, typically CLI flags.
            environ (Optional[Mapping]): Environment to read; defaults to ``os.environ``.
        """
        self.settings: Dict[str, Any] = {k.upper(): v for k, v in constants.DEFAULT_SETTINGS.items()}
        self.config_file_path = config_file_path
        self.settings_path = settings_path

        # 1. JSON config file
        if self.config_file_path:
            try:
                if os.path.exists(self.config_file_path):
                    with open(self.config_file_path, 'r') as f:
                        json_config = json.load(f)
                    self._update(json_config)
                    logger.info(f"Loaded and applied configuration from {self.config_file_path}")
                else:
                    logger.debug(f"JSON configuration file not found at {self.config_file_path}. Skipping.")
            except json.JSONDecodeError:
                logger.error(f"Error decoding JSON from {self.config_file_path}. Using defaults/env vars only.", exc_info=True)

        # 2. key = value settings file
        if self.settings_path:
            if not os.path.isfile(self.settings_path):
                raise DataFormatError("Settings file not found", path=self.settings_path)
            values = dotenv_values(self.settings_path)
            self._update({k: v for k, v in values.items() if v is not None})
            logger.info(f"Loaded {len(values)} settings from {self.settings_path}")

        # 3. Prefixed environment variables
        env = os.environ if environ is None else environ
        for key, value in env.items():
            if key.startswith(ENV_PREFIX):
                self.settings[key[len(ENV_PREFIX):].upper()] = value
                logger.debug(f"Loaded from environment: {key}")

        # 4. Explicit overrides
        if overrides:
            self._update({k: v for k, v in overrides.items() if v is not None})

    def _update(self, values: Mapping[str, Any]) -> None:
        for key, value in values.items():
            self.settings[str(key).upper()] = value

    def get(self, key: str, default: Any = None, var_type: Optional[Type] = None) -> Any:
        """
        Retrieves a configuration value.

        Args:
            key (str): The configuration key (case-insensitive).
            default (Any, optional): The default value if the key is not found.
            var_type (Optional[Type], optional): Type to cast to (bool, int, float, list, dict, str).
                For bool, "true", "1", "yes" (case-insensitive) are True. Lists are comma-separated.

        Returns:
            Any: The configuration value, or the default if not found or not castable.
        """
        value = self.settings.get(key.upper(), default)
        if value is None or var_type is None:
            return value
        try:
            if var_type == bool:
                if isinstance(value, str):
                    return value.strip().lower() in ['true', '1', 'yes', 't', 'y']
                return bool(value)
            if var_type == list:
                if isinstance(value, str):
                    return [item.strip() for item in value.split(',') if item.strip()]
                return list(value)
            if var_type == dict:
                if isinstance(value, str):
                    return json.loads(value)
                return dict(value)
            if var_type == int and isinstance(value, str):
                return int(float(value)) if "." in value else int(value)
            return var_type(value)
        except (ValueError, TypeError, json.JSONDecodeError) as e:
            logger.warning(f"Could not cast value for key '{key}' ('{value}') to type {var_type}. Error: {e}. Returning default.")
            return default

    def get_prefixed(self, prefix: str) -> Dict[str, Any]:
        """Returns all settings whose key starts with ``prefix`` (prefix stripped, lower-cased)."""
        prefix = prefix.upper()
        return {key[len(prefix):].lower(): value
                for key, value in self.settings.items() if key.startswith(prefix)}

    def get_all_settings(self) -> dict:
        """Returns all current settings."""
        return self.settings.copy()
