"""Root logger configuration."""

import logging
from typing import Optional

from core.config.app_settings import AppSettings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(settings: Optional[AppSettings] = None) -> logging.Logger:
    """Configure the root logger: a stream handler plus an optional log file."""
    settings = settings or AppSettings()
    handlers = [logging.StreamHandler()]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))

    logging.basicConfig(
        level=settings.log_level.upper(),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    return logging.getLogger("dsgs")
