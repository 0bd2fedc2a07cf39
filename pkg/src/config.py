"""
Configuration management
"""

import logging
import sys
from functools import lru_cache

import structlog
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings"""

    # API Configuration
    api_host: str = "0.0.0.0"
    api_port: int = 8000
    debug: bool = False
    max_api_tiles: int = 32
    max_batch_size: int = 100

    # Output
    results_dir: str = "./results"

    # Policy network
    hidden_width: int = 64
    default_window: int = 1

    # Optimizer (Adam)
    learning_rate: float = 0.01
    adam_eps: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    critic_lr_scale: float = 0.5

    # A2C
    entropy_beta: float = 0.02
    t_max: int = 40
    gamma: float = 1.0
    total_steps: int = 10000
    eval_every: int = 250

    # Logging
    log_level: str = "INFO"
    log_json: bool = False

    model_config = SettingsConfigDict(env_file=".env", env_prefix="SCHEDLAB_", extra="ignore")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Get application settings"""
    return Settings()


def configure_logging(level: str = "INFO", json: bool = False) -> None:
    """Route structlog output to stderr at the requested level"""
    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO

    renderer = structlog.processors.JSONRenderer() if json else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
