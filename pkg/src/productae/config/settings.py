"""Project-wide settings management via Pydantic BaseSettings."""
from __future__ import annotations

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Central configuration for the ProductAE laboratory."""

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", env_prefix="PRODUCTAE_")

    data_dir: Path = Path("./data")
    registry_path: Path = Path("./data/productae.db")
    registry_enabled: bool = True

    log_level: str = "INFO"
    default_seed: int = 20240101

    # Monte-Carlo sweeps
    sweep_shards: int = 1
    min_block_errors: int = 100
    max_blocks: int = 1_000_000
    blocks_per_round: int = 10_000


def get_settings() -> Settings:
    """Provide a settings instance read from the environment."""

    return Settings()
