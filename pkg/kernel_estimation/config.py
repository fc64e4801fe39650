"""Toolkit configuration using Pydantic settings."""

from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from kernel_estimation.utils.errors import ConfigurationError


class Settings(BaseSettings):
    """Runtime settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="KERNEL_EST_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    json_logs: bool = Field(default=False, description="Render logs as JSON lines")

    # Numerics
    precision: int = Field(default=32, description="Floating point width used for training and inference (32 or 64)")
    default_seed: int = Field(default=0, ge=0, description="Seed used when a command is given none")
    kernel_size: int = Field(default=21, description="Side length of the discretized blur kernels")

    # Output
    output_dir: Path = Field(
        default=Path("runs"),
        description="Root for run artifacts; training runs default to its train subdirectory",
    )

    @field_validator("precision")
    @classmethod
    def validate_precision(cls, v: int) -> int:
        """Only 32- and 64-bit floats are supported."""
        if v not in (32, 64):
            raise ConfigurationError("precision must be 32 or 64", details={"precision": v})
        return v

    @field_validator("kernel_size")
    @classmethod
    def validate_kernel_size(cls, v: int) -> int:
        """Kernels need a center tap."""
        if v < 1 or v % 2 == 0:
            raise ConfigurationError("kernel_size must be a positive odd integer", details={"kernel_size": v})
        return v

    @property
    def dtype(self) -> np.dtype:
        """Numpy dtype matching the configured precision."""
        return resolve_dtype(self.precision)


def resolve_dtype(precision: int) -> np.dtype:
    """
    Map a precision in bits to a numpy float dtype.

    Args:
        precision: 32 or 64

    Returns:
        numpy dtype
    """
    if precision == 32:
        return np.dtype(np.float32)
    if precision == 64:
        return np.dtype(np.float64)
    raise ConfigurationError("precision must be 32 or 64", details={"precision": precision})


def load_key_value_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a plain-text ``key=value`` file with ``#`` comments.

    Args:
        path: File path

    Returns:
        Mapping of keys to raw string values (keys lower-cased, dashes to underscores)
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigurationError(f"Config file not found: {file_path}", details={"path": str(file_path)})
    raw = dotenv_values(file_path, encoding="utf-8")
    return {
        key.strip().lower().replace("-", "_"): value
        for key, value in raw.items()
        if value is not None
    }


# Global settings instance
settings: Optional[Settings] = None


def get_settings() -> Settings:
    """
    Get toolkit settings singleton.

    Returns:
        Settings instance
    """
    global settings
    if settings is None:
        settings = Settings()
    return settings
