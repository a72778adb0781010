"""Winner-take-all block matching on rectified pairs with validity masking."""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from core.config.settings import MatchingCost, StereoSettings
from core.errors import ConfigurationError, ShapeError
from core.stereo.costs import census_cost_volume, sad_cost_volume, to_gray

logger = logging.getLogger(__name__)

INVALID_DISPARITY = -1.0
SUBPIXEL_CLAMP = 0.5
FLAT_COST_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Disparity in pixels, valid where ``valid`` is set; -1 elsewhere."""
    disparity: np.ndarray
    valid: np.ndarray
    d_max: int

    def __post_init__(self):
        if self.disparity.shape != self.valid.shape:
            raise ShapeError(f"Disparity {self.disparity.shape} and mask {self.valid.shape} differ")

    @property
    def shape(self):
        return self.disparity.shape

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if self.valid.size else 0.0

    def masked(self, keep: np.ndarray) -> "DisparityMap":
        """Intersect the valid set with ``keep``; never adds pixels."""
        valid = self.valid & np.asarray(keep, dtype=bool)
        disparity = np.where(valid, self.disparity, INVALID_DISPARITY)
        return replace(self, disparity=disparity, valid=valid)

    def mirrored(self) -> "DisparityMap":
        return replace(self, disparity=self.disparity[:, ::-1].copy(), valid=self.valid[:, ::-1].copy())


def _resolve_d_max(width: int, d_max: Optional[int], settings: StereoSettings) -> int:
    if d_max is None:
        d_max = settings.d_max if settings.d_max is not None else width // 4
    if d_max < 1:
        raise ConfigurationError(f"d_max must be at least 1, got {d_max}")
    if d_max >= width:
        raise ConfigurationError(f"d_max ({d_max}) must be smaller than the image width ({width})")
    return int(d_max)


def compute_disparity(
    left: np.ndarray,
    right: np.ndarray,
    d_max: Optional[int] = None,
    window: Optional[int] = None,
    settings: Optional[StereoSettings] = None,
) -> DisparityMap:
    """Left-referenced disparity of a rectified pair.

    Args:
        left: (H,W,3) or (H,W) left image
        right: Right image of the same shape
        d_max: Largest disparity searched (default settings.d_max, else width // 4)
        window: Odd aggregation window (default settings.window)
        settings: Matcher settings

    Returns:
        DisparityMap with border, textureless and ambiguous pixels invalid

    Raises:
        ShapeError: Image shapes differ.
        ConfigurationError: d_max >= width or an invalid window.
    """
    settings = settings or StereoSettings()
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape:
        raise ShapeError(f"Stereo pair shapes differ: {left.shape} vs {right.shape}")
    H, W = left.shape[:2]
    d_max = _resolve_d_max(W, d_max, settings)
    window = settings.window if window is None else window
    if window < 3 or window % 2 == 0:
        raise ConfigurationError(f"Aggregation window must be odd and >= 3, got {window}")

    if settings.cost == MatchingCost.SAD:
        volume = sad_cost_volume(left, right, d_max)
    else:
        volume = census_cost_volume(left, right, d_max, settings.census_size)
    aggregated = ndimage.uniform_filter(volume, size=(1, window, window), mode="nearest")

    best = np.argmin(aggregated, axis=0)
    rows, cols = np.indices((H, W))
    c0 = aggregated[best, rows, cols]
    disparity = best.astype(np.float64)

    # Parabola through the minimum and its neighbours
    interior = (best > 0) & (best < d_max)
    b_lo = np.clip(best - 1, 0, d_max)
    b_hi = np.clip(best + 1, 0, d_max)
    c_lo = aggregated[b_lo, rows, cols]
    c_hi = aggregated[b_hi, rows, cols]
    curvature = c_lo - 2.0 * c0 + c_hi
    refine = interior & (curvature > 0)
    offset = np.zeros((H, W))
    offset[refine] = (c_lo[refine] - c_hi[refine]) / (2.0 * curvature[refine])
    disparity += np.clip(offset, -SUBPIXEL_CLAMP, SUBPIXEL_CLAMP)

    half = window // 2
    valid = np.zeros((H, W), dtype=bool)
    valid[half:H - half, d_max + half:W - half] = True

    gray = to_gray(left)
    mean = ndimage.uniform_filter(gray, size=window, mode="nearest")
    mean_sq = ndimage.uniform_filter(gray * gray, size=window, mode="nearest")
    local_std = np.sqrt(np.maximum(mean_sq - mean * mean, 0.0))
    valid &= local_std >= settings.texture_threshold
    valid &= (aggregated.max(axis=0) - aggregated.min(axis=0)) > FLAT_COST_EPS

    if settings.uniqueness_ratio > 0:
        suppressed = aggregated.copy()
        for shift in (-1, 0, 1):
            suppressed[np.clip(best + shift, 0, d_max), rows, cols] = np.inf
        second = suppressed.min(axis=0)
        valid &= second > c0 * (1.0 + settings.uniqueness_ratio)

    disparity = np.where(valid, disparity, INVALID_DISPARITY)
    logger.debug(f"Matched {H}x{W} pair, d_max={d_max}, valid {valid.mean():.1%}")
    return DisparityMap(disparity=disparity, valid=valid, d_max=d_max)


def compute_right_disparity(
    left: np.ndarray,
    right: np.ndarray,
    d_max: Optional[int] = None,
    window: Optional[int] = None,
    settings: Optional[StereoSettings] = None,
) -> DisparityMap:
    """Right-referenced disparity: right pixel x matches left pixel x + d."""
    left = np.asarray(left)
    right = np.asarray(right)
    flipped = compute_disparity(right[:, ::-1], left[:, ::-1], d_max, window, settings)
    return flipped.mirrored()


def lr_consistency(d_left: DisparityMap, d_right: DisparityMap, tol: float = 1.0) -> DisparityMap:
    """Invalidate left pixels whose match disagrees with the right-referenced map.

    A left pixel x is kept when ``|d_L(x) - d_R(x - round(d_L(x)))| <= tol``.
    Matches falling outside the image or on an invalid right pixel count as
    infinitely inconsistent, so only an infinite tolerance keeps them.
    """
    if d_left.shape != d_right.shape:
        raise ShapeError(f"Disparity maps differ in shape: {d_left.shape} vs {d_right.shape}")
    H, W = d_left.shape
    rows, cols = np.indices((H, W))
    target = cols - np.rint(np.where(d_left.valid, d_left.disparity, 0.0)).astype(np.int64)
    inside = (target >= 0) & (target < W)
    safe_target = np.clip(target, 0, W - 1)
    matched_valid = inside & d_right.valid[rows, safe_target]
    diff = np.where(matched_valid, np.abs(d_left.disparity - d_right.disparity[rows, safe_target]), np.inf)
    result = d_left.masked(~(diff > tol))
    logger.debug(f"LR check kept {int(result.valid.sum())}/{int(d_left.valid.sum())} pixels")
    return result


def match_pair(
    left: np.ndarray,
    right: np.ndarray,
    d_max: Optional[int] = None,
    settings: Optional[StereoSettings] = None,
) -> DisparityMap:
    """Left map, right map and the consistency check in one call."""
    settings = settings or StereoSettings()
    d_left = compute_disparity(left, right, d_max, settings=settings)
    d_right = compute_right_disparity(left, right, d_left.d_max, settings=settings)
    return lr_consistency(d_left, d_right, settings.lr_tolerance)
