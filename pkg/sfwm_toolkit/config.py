"""Typed process settings for the toolkit."""

from __future__ import annotations

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    run_config_path: Path = Field(default=Path("sfwm.yaml"), alias="SFWM_RUN_CONFIG")
    out_dir: Path = Field(default=Path("out"), alias="SFWM_OUT_DIR")
    seed: int = Field(default=0, alias="SFWM_SEED")
    grid_points: int = Field(default=256, alias="SFWM_GRID_POINTS")
    workers: int = Field(default=1, alias="SFWM_WORKERS")
    log_level: str = Field(default="INFO", alias="SFWM_LOG_LEVEL")

    model_config = SettingsConfigDict(
        env_file=".env",
        extra="forbid",
        populate_by_name=True,
    )


settings = Settings()
