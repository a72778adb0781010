"""Classical rectified stereo matching."""

from core.stereo.costs import census_cost_volume, census_transform, hamming, sad_cost_volume, to_gray
from core.stereo.matcher import (
    INVALID_DISPARITY,
    DisparityMap,
    compute_disparity,
    compute_right_disparity,
    lr_consistency,
    match_pair,
)

__all__ = [
    'census_cost_volume',
    'census_transform',
    'hamming',
    'sad_cost_volume',
    'to_gray',
    'INVALID_DISPARITY',
    'DisparityMap',
    'compute_disparity',
    'compute_right_disparity',
    'lr_consistency',
    'match_pair',
]
