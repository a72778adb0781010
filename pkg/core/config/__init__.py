"""Configuration module for the splatting engine."""

from core.config.settings import (
    PriorMode,
    MatchingCost,
    RenderSettings,
    StereoSettings,
    TrainConfig,
    build_model,
    load_train_config,
    save_train_config,
)
from core.config.app_settings import AppSettings
from core.config.logging_setup import setup_logging

__all__ = [
    'PriorMode',
    'MatchingCost',
    'RenderSettings',
    'StereoSettings',
    'TrainConfig',
    'build_model',
    'load_train_config',
    'save_train_config',
    'AppSettings',
    'setup_logging',
]
