"""Process-level settings read from the environment."""

from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class AppSettings(BaseSettings):
    """Logging knobs (env prefix ``DSGS_``)."""
    model_config = SettingsConfigDict(env_prefix="DSGS_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    log_file: Optional[str] = None
