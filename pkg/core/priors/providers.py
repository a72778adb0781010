"""Prior provider interface and construction from a prior mode."""

import logging
from typing import Optional, Protocol

import numpy as np

from core.config.settings import PriorMode, TrainConfig
from core.errors import ConfigurationError, EmptyPriorError
from core.io.dataset import Dataset, View
from core.priors.sparse import ExternalPriorProvider, OraclePriorProvider, SparsePriorProvider
from core.priors.stereo import DEFAULT_TARGET_DISPARITY, StereoPriorProvider, default_baseline_interval
from core.priors.types import DepthPrior, PriorCache
from core.scene.gaussians import GaussianCloud

logger = logging.getLogger(__name__)

MIN_TARGET_DISPARITY = 2.0
WIDTH_PER_TARGET_DISPARITY = 8


class PriorProvider(Protocol):
    """Source of D_k for a view at a training iteration."""
    cache: PriorCache

    def get(self, view: View, cloud: GaussianCloud, iteration: int,
            rng: Optional[np.random.Generator] = None) -> Optional[DepthPrior]:
        ...


def target_disparity_for(width: int) -> float:
    """Baseline target disparity scaled down for small images."""
    return float(min(DEFAULT_TARGET_DISPARITY, max(MIN_TARGET_DISPARITY, width / WIDTH_PER_TARGET_DISPARITY)))


def resolve_baseline_interval(dataset: Dataset, cfg: TrainConfig):
    """Configured [b_min, b_max], else one derived from the sparse points."""
    if cfg.baseline_interval is not None:
        return cfg.baseline_interval
    cams = [v.camera for v in dataset.train_views]
    target = target_disparity_for(min(c.width for c in cams))
    try:
        interval = default_baseline_interval(dataset.point_array(), cams, target)
    except EmptyPriorError as e:
        raise ConfigurationError(
            f"{e}; set baseline_min and baseline_max in the training config"
        ) from e
    logger.info(f"Derived stereo baseline interval [{interval[0]:.4g}, {interval[1]:.4g}] "
                f"for a target disparity of {target:g}px")
    return interval


def build_prior_provider(mode: PriorMode, dataset: Dataset, cfg: TrainConfig) -> Optional[PriorProvider]:
    """Provider for a prior mode; None for ``PriorMode.NONE``.
    """
    mode = PriorMode(mode)
    if mode == PriorMode.NONE:
        return None
    if mode == PriorMode.STEREO:
        return StereoPriorProvider(cfg, resolve_baseline_interval(dataset, cfg))
    if mode == PriorMode.SFM:
        if not dataset.points:
            raise ConfigurationError("SfM priors need sparse points in the dataset")
        return SparsePriorProvider(dataset.points, cfg.depth_start)
    if mode == PriorMode.EXTERNAL:
        if dataset.prior_dir is None:
            raise ConfigurationError("External priors need a prior directory")
        return ExternalPriorProvider(dataset.prior_dir, dataset.train_views, dataset.points, cfg.depth_start)
    return OraclePriorProvider(cfg.depth_start)
