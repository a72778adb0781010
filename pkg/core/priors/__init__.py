"""Depth priors supervising training: self-evolving stereo, sparse SfM, external and oracle."""

from core.priors.types import DepthPrior, PriorCache, PriorEvent, PriorSource, PriorStats
from core.priors.stereo import (
    StereoPriorProvider,
    default_baseline_interval,
    get_prior,
    pair_d_max,
    stereo_prior,
    triangulate_disparity,
)
from core.priors.sparse import (
    ExternalPriorProvider,
    OraclePriorProvider,
    SparsePriorProvider,
    StaticPriorProvider,
    align_external_prior,
    fit_scale_shift,
    sparse_prior_from_points,
)
from core.priors.providers import PriorProvider, build_prior_provider, resolve_baseline_interval

__all__ = [
    'DepthPrior',
    'PriorCache',
    'PriorEvent',
    'PriorSource',
    'PriorStats',
    'StereoPriorProvider',
    'default_baseline_interval',
    'get_prior',
    'pair_d_max',
    'stereo_prior',
    'triangulate_disparity',
    'ExternalPriorProvider',
    'OraclePriorProvider',
    'SparsePriorProvider',
    'StaticPriorProvider',
    'align_external_prior',
    'fit_scale_shift',
    'sparse_prior_from_points',
    'PriorProvider',
    'build_prior_provider',
    'resolve_baseline_interval',
]
