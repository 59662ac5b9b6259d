# src/core/config.py

import logging
from pathlib import Path
from typing import Any, Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict, TomlConfigSettingsSource

logger = logging.getLogger(__name__)

env_path = Path(__file__).parent.parent.parent / ".env"


class Settings(BaseSettings):
    """
    Manages all tunables of the quality-assessment pipeline.
    Values come from (highest first) explicit overrides, a TOML file,
    OVQ_* environment variables, the .env file, and these defaults.
    """

    # --- Execution ---
    threads: int = Field(default=1, ge=1)
    seed: int = 2018
    show_progress: bool = False
    cache_dir: Path = Path(".ovq_cache")

    # --- Geometry ---
    viewport_size: int = Field(default=512, ge=64)
    viewport_half_fov: float = 30.0
    # Candidate-center grid used to max-pool the direction prior.
    pool_step_deg: float = Field(default=1.0, gt=0)

    # --- Saliency & candidates ---
    saliency_points: int = Field(default=10_000, ge=1)
    saliency_sigma_frac: float = 0.02
    bandwidth_frac: float = 0.10
    label_radius_deg: float = 15.0
    # Clusters holding fewer sampled points than this are not candidates.
    min_cluster_fraction: float = Field(default=0.05, ge=0.0, lt=1.0)
    # ...or fewer than this share of the strongest cluster's points.
    min_relative_support: float = Field(default=0.3, ge=0.0, le=1.0)

    # --- Random forest ---
    trees: int = Field(default=100, ge=1)
    max_depth: int = Field(default=12, ge=1)
    min_leaf: int = Field(default=5, ge=1)
    features_per_split: int = Field(default=2, ge=1, le=5)

    # --- Metrics ---
    psnr_cap_db: float = 100.0

    # --- Subjective scores ---
    f0: float = 1.0 / 6.0
    discard_seconds: float = 1.0
    rejection_scope: Literal["sequence", "panel"] = "sequence"
    fps: float = 25.0

    # --- Analysis ---
    heatmap_sigma_deg: float = 10.0

    # --- Logging ---
    # Console log level. Options: DEBUG, INFO, WARNING, ERROR
    console_log_level: str = "INFO"
    log_file: Path | None = None

    model_config = SettingsConfigDict(
        env_prefix="OVQ_", env_file=env_path, env_file_encoding="utf-8", extra="ignore"
    )


def load_settings(config_path: Path | None = None, **overrides: Any) -> Settings:
    """Builds Settings from an optional TOML file plus explicit overrides."""
    values: dict[str, Any] = {}
    if config_path is not None:
        values.update(TomlConfigSettingsSource(Settings, toml_file=config_path)())
        logger.debug(f"Loaded {len(values)} settings from {config_path}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**values)


try:
    settings = Settings()
except Exception as e:
    logger.critical(f"FATAL: Failed to load settings. Error: {e}")
    raise
