"""Configuration for the batch Bayesian quadrature engine."""

import logging
from typing import Literal

from pydantic_settings import BaseSettings

LOG_LEVELS: dict[str, int] = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class Settings(BaseSettings):
    """Process-wide settings read from the environment."""

    log: Literal["error", "info", "debug"] = "info"
    max_workers: int | None = None
    serial_likelihood: bool = False

    model_config = {"env_prefix": "BASQ_"}


def get_settings() -> Settings:
    """Get the current settings."""
    return Settings()


def configure_logging(settings: Settings | None = None) -> None:
    """Apply the configured log level to the root handler.

    Args:
        settings: Settings to use. If None, they are read from the environment.
    """
    if settings is None:
        settings = get_settings()
    logging.basicConfig(
        level=LOG_LEVELS[settings.log],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("batch_quadrature").setLevel(LOG_LEVELS[settings.log])
