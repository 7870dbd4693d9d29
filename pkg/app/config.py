import logging
import sys
from pathlib import Path
from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # App
    APP_NAME: str = "Profitable Speed Scaling"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"  # DEBUG shows per-arrival level search and oracle progress

    # Report storage
    OUTPUT_DIR: str = "./reports"

    # Level search of the online algorithm
    BISECTION_REL_TOL: float = 1e-12
    BISECTION_MAX_ITER: int = 200
    BRACKET_MAX_DOUBLINGS: int = 200

    # Certified ratio contract: ratio <= alpha^alpha * (1 + RATIO_SLACK)
    RATIO_SLACK: float = 1e-6

    # Offline oracle
    ORACLE_MAX_JOBS: int = 12
    ORACLE_MAX_ITER: int = 100_000
    ORACLE_TOL: float = 1e-8
    ORACLE_ARMIJO: float = 1e-4
    ORACLE_WORKERS: int = 1

    # Batch mode
    SWEEP_WORKERS: int = 1

    # CORS
    CORS_ORIGINS: str = "*"

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    @property
    def cors_origins_list(self) -> List[str]:
        return [origin.strip() for origin in self.CORS_ORIGINS.split(",")]

    def ensure_directories(self):
        """Create the report directory if it doesn't exist."""
        Path(self.OUTPUT_DIR).mkdir(parents=True, exist_ok=True)


def setup_logging(log_level: str = "INFO") -> logging.Logger:
    """Configure application logging."""
    formatter = logging.Formatter(
        fmt="%(asctime)s | %(levelname)-8s | %(name)s:%(lineno)d | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))

    # Remove existing handlers to avoid duplicates
    root_logger.handlers.clear()
    root_logger.addHandler(console_handler)

    app_logger = logging.getLogger("profit_sched")
    app_logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))

    return app_logger


# Global settings instance
settings = Settings()

logger = logging.getLogger("profit_sched")
