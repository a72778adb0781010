"""Validated configuration models for rendering, stereo matching and training."""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.errors import ConfigurationError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class PriorMode(str, Enum):
    """Source of the depth prior D_k supervising training."""
    NONE = "none"
    STEREO = "stereo"
    SFM = "sfm"
    EXTERNAL = "external"
    ORACLE = "oracle"


class MatchingCost(str, Enum):
    """Per-pixel matching cost used by the block matcher."""
    CENSUS = "census"
    SAD = "sad"


class RenderSettings(BaseModel):
    """Rasterizer constants."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha_max: float = Field(0.99, gt=0, lt=1)
    t_stop: float = Field(1e-4, ge=0, lt=1)
    low_pass: float = Field(0.3, ge=0)
    eps_depth: float = Field(1e-4, gt=0)
    eps_norm: float = Field(1e-8, gt=0)
    alpha_mask: float = Field(0.5, ge=0, lt=1)
    bbox_sigma: float = Field(3.0, gt=0)


class StereoSettings(BaseModel):
    """Block matcher and stereo prior settings."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    cost: MatchingCost = MatchingCost.CENSUS
    census_size: int = Field(7, ge=3, le=7)  # code must fit 64 bits
    window: int = Field(9, ge=3)
    d_max: Optional[int] = Field(None, ge=1)  # None: width // 4
    lr_tolerance: float = Field(1.0, gt=0)
    d_min: float = Field(0.5, ge=0)
    texture_threshold: float = Field(1e-3, ge=0)  # min local gray std
    uniqueness_ratio: float = Field(0.0, ge=0, lt=1)

    @field_validator("census_size", "window")
    @classmethod
    def validate_odd(cls, v):
        """Windows are centred on the pixel."""
        if v % 2 == 0:
            raise ValueError(f"window sizes must be odd, got {v}")
        return v


class TrainConfig(BaseModel):
    """Training schedule, loss weights and optimizer settings."""
    model_config = ConfigDict(extra="forbid")

    iterations: int = Field(2000, ge=1)
    lambda1: float = Field(0.2, ge=0, le=1)
    lambda2: float = Field(0.1, ge=0)
    depth_start: int = Field(1000, ge=0)  # T
    refresh_interval: int = Field(100, ge=1)  # tau_refresh
    baseline_min: Optional[float] = Field(None, ge=0)
    baseline_max: Optional[float] = Field(None, ge=0)
    prior_mode: PriorMode = PriorMode.STEREO

    # Learning rates per parameter group
    position_lr_init: float = Field(1.6e-4, ge=0)
    position_lr_final: float = Field(1.6e-6, ge=0)
    sh_lr: float = Field(2.5e-3, ge=0)
    opacity_lr: float = Field(5e-2, ge=0)
    scale_lr: float = Field(5e-3, ge=0)
    rotation_lr: float = Field(1e-3, ge=0)

    # Adaptive density control
    densify_from: int = Field(200, ge=0)
    densify_until: int = Field(1500, ge=0)
    densify_interval: int = Field(100, ge=1)
    densify_grad_threshold: float = Field(2e-4, ge=0)
    percent_dense: float = Field(0.01, gt=0)
    split_scale_factor: float = Field(0.8, gt=0, le=1)
    prune_opacity: float = Field(0.005, ge=0, lt=1)
    max_gaussians: int = Field(20000, ge=1)

    # Initialization
    sh_degree: int = Field(0, ge=0, le=3)
    init_from_sparse: bool = True
    init_random_points: int = Field(500, ge=1)
    init_opacity: float = Field(0.1, gt=0, lt=1)

    background: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0
    render: RenderSettings = Field(default_factory=RenderSettings)
    stereo: StereoSettings = Field(default_factory=StereoSettings)

    @model_validator(mode="after")
    def check_schedule(self):
        """Cross-field invariants of the schedule."""
        if self.depth_start > self.iterations:
            raise ValueError(
                f"depth_start ({self.depth_start}) must not exceed iterations ({self.iterations})"
            )
        if (
            self.baseline_min is not None
            and self.baseline_max is not None
            and self.baseline_min > self.baseline_max
        ):
            raise ValueError(
                f"baseline_min ({self.baseline_min}) > baseline_max ({self.baseline_max})"
            )
        if any(not 0.0 <= c <= 1.0 for c in self.background):
            raise ValueError(f"background must lie in [0,1], got {self.background}")
        return self

    @property
    def baseline_interval(self) -> Optional[Tuple[float, float]]:
        """[b_min, b_max] when both ends are configured."""
        if self.baseline_min is None or self.baseline_max is None:
            return None
        return (self.baseline_min, self.baseline_max)


def _format_validation_error(e: ValidationError) -> str:
    messages = []
    for error in e.errors():
        field = '.'.join(str(x) for x in error['loc']) or '<root>'
        messages.append(f"{field}: {error['msg']}")
    return " | ".join(messages)


def build_model(model_cls: Type[ModelT], data: Dict[str, Any]) -> ModelT:
    """Validate a mapping into a settings model.

    Raises:
        ConfigurationError: With every validation message joined.
    """
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(_format_validation_error(e)) from e


def load_train_config(path: Union[str, Path, None]) -> TrainConfig:
    """Read a TrainConfig from a JSON document (defaults when path is None)."""
    if path is None:
        return TrainConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in {path}: line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config root must be an object: {path}")
    cfg = build_model(TrainConfig, data)
    logger.info(f"Loaded train config from {path}")
    return cfg


def save_train_config(cfg: TrainConfig, path: Union[str, Path]) -> None:
    """Write a TrainConfig as JSON."""
    Path(path).write_text(cfg.model_dump_json(indent=2), encoding="utf-8")
