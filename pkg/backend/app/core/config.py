"""
Process-level LoadShuffle settings. Run-level choices live in RunConfig.
"""
from pydantic_settings import BaseSettings
from typing import Optional
from functools import lru_cache


class Settings(BaseSettings):
    """Settings read from the environment or .env; override any key by name."""

    # Application
    APP_NAME: str = "LoadShuffle"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Output
    OUTPUT_DIR: str = "out"
    QUANTILE_PRECISION: int = 6  # decimals in forecast CSVs
    SCORE_DECIMALS: int = 2

    # Execution
    MAX_WORKERS: int = 4

    # Data model
    DST_PASSTHROUGH_FROM_YEAR: int = 2016
    HOLIDAY_COUNTRY: str = "US"
    HOLIDAY_SUBDIVISION: Optional[str] = None

    # Modelling
    TREND_BASE_YEAR: int = 2003
    MIN_TRAINING_DAYS: int = 365

    # Monitoring
    LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"  # Relative to the working directory
        case_sensitive = True
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """Settings are read once per process."""
    return Settings()


# Global settings instance
settings = get_settings()
