"""
Run configuration resolution.

Sources, later ones winning: built-in defaults, environment variables, a flat
``key = value`` config file (``#`` comments), command-line flags.
"""
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from schemas.run import RunConfig
from services.errors import InputNotFound, UsageError

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

ENV_KEYS = {
    "FORECAST_DATA_DIR": "data_dir",
    "FORECAST_OUTPUT_DIR": "out",
    "FORECAST_SEED": "seed",
    "FORECAST_N_TEST": "n_test",
    "FORECAST_WORKERS": "workers",
}


def normalise_key(key: str) -> str:
    """Config keys are case-insensitive and treat dashes as underscores."""
    return key.strip().lower().replace("-", "_")


def env_settings() -> Dict[str, str]:
    return {field: os.environ[var] for var, field in ENV_KEYS.items() if os.getenv(var)}


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a flat ``key = value`` file with python-dotenv.

    Args:
        path: Config file; keys are normalised with :func:`normalise_key`

    Returns:
        Raw string values keyed by RunConfig field

    Raises:
        InputNotFound: If the file does not exist
        UsageError: On a key RunConfig does not define
    """
    path = Path(path)
    if not path.is_file():
        raise InputNotFound(str(path))
    settings: Dict[str, str] = {}
    for key, value in dotenv_values(path).items():
        name = normalise_key(key)
        if name not in RunConfig.model_fields:
            raise UsageError(f"Unknown config key '{key}' in {path}")
        settings[name] = "" if value is None else value
    return settings


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    key = ".".join(str(part) for part in first["loc"]) or "config"
    return f"Invalid value for '{key}': {first['msg']}"


def resolve(flags: Optional[Mapping[str, Any]] = None, config_file: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Merge every source into a validated RunConfig.

    Args:
        flags: Command-line values; None entries are treated as unset
        config_file: Optional file read by :func:`read_config_file`

    Returns:
        RunConfig from defaults, then environment, then file, then flags

    Raises:
        InputNotFound: If ``config_file`` does not exist
        UsageError: On an unknown key or a value that fails validation, naming the key
    """
    merged: Dict[str, Any] = dict(env_settings())
    if config_file:
        merged.update(read_config_file(config_file))
    merged.update({key: value for key, value in (flags or {}).items() if value is not None})
    unknown = sorted(set(merged) - set(RunConfig.model_fields))
    if unknown:
        raise UsageError(f"Unknown config key(s): {', '.join(unknown)}")
    try:
        config = RunConfig(**merged)
    except ValidationError as error:
        raise UsageError(_describe(error))
    logger.debug("Resolved config: %s", config.as_flat())
    return config


def render(config: RunConfig) -> str:
    """``key = value`` lines, keys sorted; :func:`read_config_file` parses it back."""
    flat = config.as_flat()
    return "".join(f"{key} = {flat[key]}\n" for key in sorted(flat))
