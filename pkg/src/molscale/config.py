"""Configuration management for molscale."""

import logging
from pathlib import Path
from typing import Any

from pydantic import ValidationError
from pydantic_settings import BaseSettings

from molscale.errors import ConfigError

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Logging
    log_level: str = "INFO"
    log_path: Path = Path.home() / ".molscale" / "logs"

    # Commands without an output directory write their run manifest here
    runs_path: Path = Path.home() / ".molscale" / "runs"

    default_seed: int = 0

    model_config = {
        "env_prefix": "MOLSCALE_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
    }

    def ensure_directories(self) -> None:
        """Create necessary directories if they don't exist."""
        self.log_path.mkdir(parents=True, exist_ok=True)
        self.runs_path.mkdir(parents=True, exist_ok=True)


settings = Settings()


def parse_key_value_file(path: Path) -> dict[str, str]:
    """Read a flat ``key = value`` file. ``#`` starts a comment."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    values: dict[str, str] = {}
    for line_num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' in {path}", line=line_num)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"empty key in {path}", line=line_num)
        if key in values:
            raise ConfigError(f"duplicate key '{key}' in {path}", line=line_num)
        values[key] = value
    return values


def load_run_config(path: Path):
    """Load a run config file into a (ModelConfig, TrainConfig) pair.

    Keys are TrainConfig field names, ModelConfig field names (overriding the
    preset) and ``preset``. Unknown keys are rejected.
    """
    from molscale.model.config import ModelConfig, get_preset
    from molscale.trainer.config import TrainConfig

    values = parse_key_value_file(path)
    preset_name = values.pop("preset", "tiny")

    model_fields = set(ModelConfig.model_fields)
    train_fields = set(TrainConfig.model_fields)
    model_values: dict[str, Any] = {}
    train_values: dict[str, Any] = {}
    for key, value in values.items():
        if key in train_fields:
            train_values[key] = _coerce(key, value)
        elif key in model_fields:
            model_values[key] = _coerce(key, value)
        else:
            raise ConfigError(f"unknown config key '{key}'")

    try:
        base = get_preset(preset_name)
        model_cfg = ModelConfig.model_validate({**base.model_dump(), **model_values})
        train_cfg = TrainConfig.model_validate(train_values)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigError(f"invalid value for '{key}': {first['msg']}") from e

    logger.info(f"Loaded run config from {path} (preset {preset_name})")
    return model_cfg, train_cfg


def _coerce(key: str, value: str) -> Any:
    """Turn comma-separated values into lists; leave scalars for pydantic."""
    if "," in value:
        return [part.strip() for part in value.split(",")]
    return value
