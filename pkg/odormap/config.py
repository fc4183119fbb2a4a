import json
import logging
import os
from pathlib import Path
from threading import RLock

logger = logging.getLogger(__name__)

DEFAULTS = {
    "ODORMAP_ENDPOINT": "https://api.openai.com/v1",
    "ODORMAP_MODEL": "gpt-4o-mini",
    "ODORMAP_API_KEY_ENV": "ODORMAP_API_KEY",
}


class ConfigManager:
    """Read-only settings: config file, then environment, then defaults."""

    _instance = None
    _lock = RLock()

    @classmethod
    def get_instance(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = cls()
        return cls._instance

    def __init__(self, config_path: Path | None = None):
        self._config_path = config_path or (
            Path.home() / ".config" / "odormap" / "config.json"
        )
        self._config_data = {}
        if self._config_path.exists():
            self._load_config()

    def _load_config(self):
        with self._lock:
            try:
                with self._config_path.open("r", encoding="utf-8") as f:
                    data = json.load(f)
            except (PermissionError, OSError, json.JSONDecodeError) as e:
                logger.warning(
                    f"Could not load config file {self._config_path}: {e}. Using defaults."
                )
                data = {}
            if not isinstance(data, dict):
                logger.warning(f"Ignoring {self._config_path}: not a JSON object")
                data = {}
            self._config_data = data

    @classmethod
    def custom_config(cls, file_path):
        """Load settings from an explicit path instead of the home directory."""
        custom_path = Path(file_path)
        if not custom_path.exists():
            raise FileNotFoundError(f"Config file {custom_path} not found!")
        with cls._lock:
            cls._instance = cls(custom_path)

    @classmethod
    def reset(cls):
        with cls._lock:
            cls._instance = None

    @classmethod
    def get(cls, key, default=None):
        instance = cls.get_instance()
        if key in instance._config_data:
            return instance._config_data[key]
        if key in os.environ:
            return os.environ[key]
        if default is None:
            default = DEFAULTS.get(key)
        return default
