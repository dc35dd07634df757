"""
Mridangam Stroke Transcriber - Configuration Module

This module handles environment variable loading, validation, and the
flag > config file > environment > default resolution used by the CLI.
"""

import os
import logging
from typing import Any, Callable, Dict, Mapping, Optional
from dotenv import dotenv_values, load_dotenv

# Load environment variables from .env file
load_dotenv()

# Configure logging
logging.basicConfig(
    level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

ENV_PREFIX = "MRIDANGAM_"


class ConfigurationError(Exception):
    """Raised when configuration validation fails."""

    pass


def get_env_var(
    var_name: str, required: bool = True, default: Optional[str] = None
) -> Optional[str]:
    """
    Get environment variable with optional default and validation.

    Args:
        var_name: Name of the environment variable
        required: Whether the variable is required
        default: Default value if not required and not found

    Returns:
        The environment variable value or default

    Raises:
        ConfigurationError: If required variable is missing
    """
    value = os.getenv(var_name, default)
    if required and not value:
        raise ConfigurationError(f"Required environment variable {var_name} is not set")
    return value


def get_env_int(
    var_name: str, required: bool = True, default: Optional[int] = None
) -> Optional[int]:
    """
    Get environment variable as integer.

    Raises:
        ConfigurationError: If required variable is missing or invalid
    """
    value = get_env_var(
        var_name, required, str(default) if default is not None else None
    )
    if value is None:
        return default

    try:
        return int(value)
    except ValueError as e:
        raise ConfigurationError(
            f"Environment variable {var_name} must be an integer, got: {value}"
        ) from e


def get_env_float(
    var_name: str, required: bool = True, default: Optional[float] = None
) -> Optional[float]:
    """Get environment variable as float."""
    value = get_env_var(
        var_name, required, repr(default) if default is not None else None
    )
    if value is None:
        return default

    try:
        return float(value)
    except ValueError as e:
        raise ConfigurationError(
            f"Environment variable {var_name} must be a number, got: {value}"
        ) from e


def get_env_bool(
    var_name: str, required: bool = True, default: Optional[bool] = None
) -> Optional[bool]:
    """Get environment variable as boolean."""
    value = get_env_var(
        var_name, required, str(default).lower() if default is not None else None
    )
    if value is None:
        return default

    return parse_bool(value)


def parse_bool(value: str) -> bool:
    return str(value).strip().lower() in ("true", "1", "yes", "on")


# =============================================================================
# APPLICATION CONFIGURATION (OPTIONAL)
# =============================================================================

LOG_LEVEL = get_env_var("LOG_LEVEL", required=False, default="INFO")
DEFAULT_SEED = get_env_int(f"{ENV_PREFIX}SEED", required=False, default=0)
LOAD_WORKERS = get_env_int(f"{ENV_PREFIX}WORKERS", required=False, default=1)

# =============================================================================
# CLI SETTINGS
# =============================================================================

# Every setting a config file may carry, with its parser and built-in
# default. Defaults are the published training values.
SETTINGS: Dict[str, tuple] = {
    "seed": (int, DEFAULT_SEED),
    "epochs": (int, 25),
    "lr": (float, 0.0002),
    "batch_size": (int, 32),
    "patience": (int, 5),
    "dropout": (float, 0.25),
    "train_fraction": (float, 0.8),
    "arch": (str, "12000,15000,9000,4500,1500,450,100,6"),
    "decimate": (int, 1),
    "normalize": (parse_bool, False),
    "merge_threshold": (float, 0.03),
    "tolerance": (float, 0.015),
    "window": (int, 2048),
    "hop": (int, 480),
    "pre": (int, 3),
    "post": (int, 3),
    "delta_ratio": (float, 0.07),
    "wait": (int, 3),
    "onset_source": (str, "annotations"),
    "shifts": (str, ""),
    "workers": (int, LOAD_WORKERS),
}


# Typed readers for MRIDANGAM_<KEY> values, by setting parser.
ENV_READERS: Dict[Callable, Callable] = {
    int: get_env_int,
    float: get_env_float,
    parse_bool: get_env_bool,
}


def _env_setting(key: str) -> Any:
    """Typed value of MRIDANGAM_<KEY>, or None when unset."""
    name = f"{ENV_PREFIX}{key.upper()}"
    if os.getenv(name) is None:
        return None
    reader = ENV_READERS.get(SETTINGS[key][0], get_env_var)
    return reader(name, required=False)


def load_config_file(path: Optional[str]) -> Dict[str, str]:
    """
    Read a flat key=value config file.

    Raises:
        ConfigurationError: If the file is missing or names an unknown key
    """
    if not path:
        return {}
    if not os.path.exists(path):
        raise ConfigurationError(f"Config file not found: {path}")

    values = {k.strip().lower().replace("-", "_"): v for k, v in dotenv_values(path).items()}
    for key in values:
        if key not in SETTINGS:
            raise ConfigurationError(f"Unknown key '{key}' in config file {path}")
    return values


def _parse(key: str, raw: Any, source: str) -> Any:
    parser: Callable = SETTINGS[key][0]
    try:
        return parser(raw)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid value for '{key}' from {source}: {raw!r}") from e


def resolve_settings(
    flags: Mapping[str, Any], config_file: Optional[str] = None
) -> Dict[str, Any]:
    """
    Resolve every known setting: flag > config file > environment > default.

    Args:
        flags: Parsed command-line values; None means "not given"
        config_file: Optional path to a flat key=value file

    Returns:
        Dictionary with a value for every key in SETTINGS
    """
    file_values = load_config_file(config_file)
    resolved: Dict[str, Any] = {}

    for key, (_, default) in SETTINGS.items():
        if flags.get(key) is not None:
            resolved[key] = flags[key]
        elif file_values.get(key) is not None:
            resolved[key] = _parse(key, file_values[key], config_file)
        else:
            from_env = _env_setting(key)
            resolved[key] = default if from_env is None else from_env

    logger.debug(f"Resolved settings: {resolved}")
    return resolved


def validate_config() -> None:
    """
    Validate environment configuration on startup.

    Raises:
        ConfigurationError: If configuration validation fails
    """
    logger.debug("Validating configuration...")

    if LOAD_WORKERS is not None and LOAD_WORKERS < 1:
        raise ConfigurationError(
            f"{ENV_PREFIX}WORKERS must be at least 1, got: {LOAD_WORKERS}"
        )

    if LOG_LEVEL and not hasattr(logging, LOG_LEVEL.upper()):
        logger.warning(f"Unknown LOG_LEVEL '{LOG_LEVEL}', falling back to INFO")

    logger.debug("✅ Configuration validation passed")


# Validate configuration on import
try:
    validate_config()
except ConfigurationError as e:
    logger.error(f"Configuration validation failed: {e}")
    raise
