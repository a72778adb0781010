"""Self-evolving stereo priors: render a virtual rectified pair, match it, triangulate."""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from core.config.settings import RenderSettings, StereoSettings, TrainConfig
from core.errors import ConfigurationError, EmptyPriorError, InvalidParameterError
from core.io.dataset import View
from core.priors.types import DepthPrior, PriorCache, PriorSource
from core.render.rasterizer import RenderedFrame, render_frame
from core.scene.camera import EPS_DEPTH, Camera, right_pose
from core.scene.gaussians import GaussianCloud
from core.stereo.matcher import match_pair

logger = logging.getLogger(__name__)

DEFAULT_TARGET_DISPARITY = 32.0
BASELINE_SPREAD = (0.5, 2.0)
EMPTY_ALPHA = 1e-6
D_MAX_MARGIN = 2


def triangulate_disparity(disparity: np.ndarray, valid: np.ndarray, fx: float, b: float,
                          d_min: float = 0.5) -> Tuple[np.ndarray, np.ndarray]:
    """Depth fx·b/d on valid pixels with d >= d_min.

    Returns:
        Tuple of (depth, valid); depth is 0 where invalid
    """
    disparity = np.asarray(disparity, dtype=np.float64)
    keep = np.asarray(valid, dtype=bool) & (disparity >= max(d_min, np.finfo(float).tiny))
    depth = np.zeros_like(disparity)
    depth[keep] = fx * b / disparity[keep]
    return depth, keep


def pair_d_max(cam: Camera, b: float, frame: RenderedFrame, settings: StereoSettings) -> int:
    """Disparity search range for a rendered pair.

    The configured d_max wins; otherwise the range covers the nearest
    rendered surface, never below width // 4.
    """
    cap = max(1, cam.width - settings.window)
    if settings.d_max is not None:
        return min(settings.d_max, cam.width - 1)
    covered = (frame.alpha > 0.5) & (frame.depth > EPS_DEPTH)
    if not np.any(covered):
        covered = frame.depth > EPS_DEPTH
    expected = cam.width // 4
    if np.any(covered):
        z_near = float(frame.depth[covered].min())
        expected = max(expected, math.ceil(cam.fx * b / z_near) + D_MAX_MARGIN)
    return int(max(1, min(expected, cap)))


def stereo_prior(
    cloud: GaussianCloud,
    cam: Camera,
    b: float,
    iteration: int,
    settings: Optional[StereoSettings] = None,
    render_settings: Optional[RenderSettings] = None,
    background: Sequence[float] = (0.0, 0.0, 0.0),
) -> DepthPrior:
    """Depth prior from the model's own rectified stereo pair.

    Renders the view and its companion at baseline ``b``, matches the pair
    with the left-right check and triangulates ``fx·b/d``.

    Raises:
        InvalidParameterError: b is not a positive finite number.
        EmptyPriorError: Nothing is rendered in the view.
    """
    settings = settings or StereoSettings()
    if not (np.isfinite(b) and b > 0):
        raise InvalidParameterError(f"Stereo baseline must be positive, got {b}")
    left = render_frame(cloud, cam, background, render_settings)
    if float(left.alpha.max(initial=0.0)) < EMPTY_ALPHA:
        raise EmptyPriorError(f"Rendered view is empty at iteration {iteration}")
    right = render_frame(cloud, right_pose(cam, b), background, render_settings)

    d_max = pair_d_max(cam, b, left, settings)
    disparity = match_pair(left.color, right.color, d_max, settings)
    depth, valid = triangulate_disparity(disparity.disparity, disparity.valid, cam.fx, b, settings.d_min)
    prior = DepthPrior(depth=depth, valid=valid, source=PriorSource.STEREO_SELF,
                       created_at=iteration, baseline_used=float(b))
    if prior.valid_count == 0:
        logger.warning(f"Stereo prior at iteration {iteration} has no valid pixel (b={b:.4g}, d_max={d_max})")
    return prior


def default_baseline_interval(points: np.ndarray, cams: Sequence[Camera],
                              target_disparity: float = DEFAULT_TARGET_DISPARITY) -> Tuple[float, float]:
    """Baseline interval aiming at a median disparity around ``target_disparity``.

    The centre is median sparse depth / fx × target; the interval spans
    [0.5, 2.0] times that.

    Raises:
        EmptyPriorError: No sparse point lies in front of any camera.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    depths = []
    for cam in cams:
        z = cam.world_to_camera(points)[:, 2]
        depths.append(z[z > EPS_DEPTH])
    depths = np.concatenate(depths) if depths else np.zeros(0)
    if depths.size == 0:
        raise EmptyPriorError("No sparse point in front of any camera to derive a baseline from")
    fx = float(np.median([c.fx for c in cams]))
    center = float(np.median(depths)) / fx * target_disparity
    return (BASELINE_SPREAD[0] * center, BASELINE_SPREAD[1] * center)


def get_prior(
    cache: PriorCache,
    view: View,
    cloud: GaussianCloud,
    cfg: TrainConfig,
    iteration: int,
    rng: np.random.Generator,
    baseline_interval: Optional[Tuple[float, float]] = None,
) -> Optional[DepthPrior]:
    """Cached stereo prior for a view, regenerated once it has expired.

    Returns None before ``cfg.depth_start``. A fresh entry is served as is;
    otherwise a baseline is drawn uniformly from the interval and a new
    prior is rendered and cached.
    """
    if iteration < cfg.depth_start:
        return None
    if cache.is_fresh(view.id, iteration, cfg.refresh_interval):
        cache.stats.cache_hits += 1
        return cache.get(view.id)

    interval = baseline_interval or cfg.baseline_interval
    if interval is None:
        raise ConfigurationError("Stereo priors need a baseline interval")
    b = float(rng.uniform(interval[0], interval[1]))
    try:
        prior = stereo_prior(cloud, view.camera, b, iteration, cfg.stereo, cfg.render, cfg.background)
    except EmptyPriorError:
        cache.stats.failures += 1
        raise
    cache.put(view.id, prior)
    logger.info(f"Step {iteration}: stereo prior for {view.id} (b={b:.4g}, valid {prior.valid_fraction:.1%})")
    return prior


class StereoPriorProvider:
    """Self-evolving priors for every training view, sharing one cache."""

    def __init__(self, cfg: TrainConfig, baseline_interval: Tuple[float, float],
                 rng: Optional[np.random.Generator] = None):
        lo, hi = baseline_interval
        if not (0 < lo <= hi and np.isfinite(hi)):
            raise ConfigurationError(f"Invalid baseline interval [{lo}, {hi}]")
        self.cfg = cfg
        self.baseline_interval = (float(lo), float(hi))
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.cache = PriorCache()

    def get(self, view: View, cloud: GaussianCloud, iteration: int,
            rng: Optional[np.random.Generator] = None) -> Optional[DepthPrior]:
        """Prior for ``view``; baselines come from ``rng`` when given, else the provider's own generator."""
        return get_prior(self.cache, view, cloud, self.cfg, iteration,
                         rng if rng is not None else self.rng, self.baseline_interval)
