"""
Configuration Settings
Environment defaults and key = value config files
"""

from typing import Dict, Optional, Any
from pathlib import Path
import logging

from decouple import config
from dotenv import dotenv_values

logger = logging.getLogger(__name__)

# Defaults can be overridden through the environment or a .env file
DEFAULT_WORKERS = config("KEYGRAPH_WORKERS", default=1, cast=int)
DEFAULT_TRIALS = config("KEYGRAPH_TRIALS", default=2000, cast=int)
DEFAULT_SEED = config("KEYGRAPH_SEED", default=20170605, cast=int)
DEFAULT_LOG_LEVEL = config("KEYGRAPH_LOG_LEVEL", default="INFO")

LOG_FORMAT = "%(asctime)s [%(levelname)s] [%(name)s] %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Config-file keys and how to cast them; names follow the long CLI flags
CONFIG_KEYS = {
    "n": int,
    "K": int,
    "P": int,
    "p": float,
    "q": int,
    "k": int,
    "trials": int,
    "seed": int,
    "workers": int,
    "out": str,
    "rho": float,
    "almost_sure": float,
    "exact_k": float,
    "max_count": int,
    "log_level": str,
}


class ConfigFileError(ValueError):
    """Raised when a config file holds an unknown key or a malformed value"""
    pass


def load_config_file(path: Path) -> Dict[str, Any]:
    """
    Read a key = value config file.

    Args:
        path: File with one `key = value` per line, `#` starts a comment

    Returns:
        Dictionary of recognised keys cast to their types
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigFileError(f"Config file not found: {path}")

    raw = dotenv_values(path)
    values: Dict[str, Any] = {}
    for key, value in raw.items():
        name = key.strip().replace("-", "_")
        if name not in CONFIG_KEYS:
            raise ConfigFileError(f"Unknown config key '{key}' in {path}")
        if value is None or value == "":
            raise ConfigFileError(f"Config key '{key}' has no value in {path}")
        try:
            values[name] = CONFIG_KEYS[name](value)
        except ValueError:
            raise ConfigFileError(f"Config key '{key}' has malformed value '{value}'")

    logger.debug("Loaded %d config values from %s", len(values), path)
    return values


def merge_settings(
    flags: Dict[str, Any],
    file_values: Optional[Dict[str, Any]] = None,
    defaults: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Flag values win over config-file values, which win over defaults"""
    merged: Dict[str, Any] = dict(defaults or {})
    for source in (file_values or {}, flags):
        for key, value in source.items():
            if value is not None:
                merged[key] = value
    return merged


def runtime_defaults() -> Dict[str, Any]:
    return {
        "workers": DEFAULT_WORKERS,
        "trials": DEFAULT_TRIALS,
        "seed": DEFAULT_SEED,
        "log_level": DEFAULT_LOG_LEVEL,
    }


def configure_logging(level: str = DEFAULT_LOG_LEVEL):
    """Install the process-wide log format"""
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt=LOG_DATE_FORMAT,
    )
