"""Configuration management for QCNN experiments.

Runtime settings come from the environment; experiment settings come from
flat ``key = value`` files (parsed with python-dotenv) and CLI flags.

Precedence: model defaults < config file < QCNN_DATA_DIR (data_dir only) < CLI flags.
"""
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

from dotenv import dotenv_values
from pydantic import ValidationError

from services.models import ExperimentConfig


DEFAULT_DATA_DIR = Path("data")
DEFAULT_OUTPUT_DIR = Path("runs")
DEFAULT_CACHE_DIR = Path.home() / ".qcnn" / "cache"


class ConfigError(Exception):
    """Raised for unreadable config files and invalid experiment settings."""
    pass


@dataclass
class RuntimeConfig:
    """Runtime configuration loaded from environment."""

    data_dir: Path
    output_dir: Path
    cache_dir: Path
    workers: int
    log_level: str
    data_dir_from_env: bool = False

    @classmethod
    def from_env(cls) -> "RuntimeConfig":
        """Load configuration from environment variables."""
        env_data = os.environ.get("QCNN_DATA_DIR")
        try:
            workers = int(os.environ.get("QCNN_WORKERS", "1"))
        except ValueError:
            raise ConfigError(f"QCNN_WORKERS must be an integer, got {os.environ['QCNN_WORKERS']!r}")
        return cls(
            data_dir=Path(env_data).expanduser() if env_data else DEFAULT_DATA_DIR,
            output_dir=Path(os.environ.get("QCNN_OUTPUT_DIR", str(DEFAULT_OUTPUT_DIR))).expanduser(),
            cache_dir=Path(os.environ.get("QCNN_CACHE_DIR", str(DEFAULT_CACHE_DIR))).expanduser(),
            workers=max(1, workers),
            log_level=os.environ.get("QCNN_LOG_LEVEL", "WARNING").upper(),
            data_dir_from_env=bool(env_data),
        )


def load_config_file(path: Union[str, Path]) -> dict[str, str]:
    """
    Read a flat key = value experiment file.

    Raises:
        ConfigError: If the file is missing or names unknown fields
    """
    path = Path(path).expanduser()
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    values = {k.strip(): v for k, v in dotenv_values(path).items() if v is not None}
    unknown = set(values) - set(ExperimentConfig.model_fields)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(sorted(unknown))}")
    return values


def build_experiment_config(
    file_values: Optional[dict[str, Any]] = None,
    overrides: Optional[dict[str, Any]] = None,
    runtime: Optional[RuntimeConfig] = None,
) -> ExperimentConfig:
    """Merge defaults, file values, environment and CLI overrides into a validated config."""
    merged: dict[str, Any] = {}
    if runtime is not None:
        merged["output_dir"] = runtime.output_dir
        merged["data_dir"] = runtime.data_dir
    merged.update(file_values or {})
    if runtime is not None and runtime.data_dir_from_env:
        merged["data_dir"] = runtime.data_dir
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {e}")
