"""Initial Gaussian cloud from sparse points or random samples."""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from core.config.settings import TrainConfig
from core.scene.gaussians import GaussianCloud, inverse_sigmoid, sh_coeff_count
from core.scene.sh import rgb_to_sh_dc

logger = logging.getLogger(__name__)

NEIGHBOURS = 3
MIN_DIST2 = 1e-7
SINGLE_POINT_SCALE = 0.01  # fraction of the bounding-box diagonal


def nearest_neighbour_scale(positions: np.ndarray, bbox: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """RMS distance to the nearest neighbours of each point."""
    n = positions.shape[0]
    if n < 2:
        diagonal = float(np.linalg.norm(np.asarray(bbox[1]) - np.asarray(bbox[0])))
        return np.full(n, SINGLE_POINT_SCALE * diagonal if diagonal > 0 else SINGLE_POINT_SCALE)
    k = min(NEIGHBOURS, n - 1)
    dist, _ = cKDTree(positions).query(positions, k=k + 1)
    dist2 = np.mean(np.asarray(dist)[:, 1:] ** 2, axis=1)
    return np.sqrt(np.maximum(dist2, MIN_DIST2))


def initialize_cloud(
    points: np.ndarray,
    bbox: Tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    rng: np.random.Generator,
    colors: Optional[np.ndarray] = None,
) -> GaussianCloud:
    """Isotropic Gaussians at SfM points, or at uniform random points in ``bbox``.

    Args:
        points: (N,3) sparse points, possibly empty
        bbox: (lo, hi) corners for random initialization
        cfg: Training config (init_from_sparse, init_random_points, init_opacity, sh_degree)
        rng: Run generator
        colors: (N,3) point colors in [0,1]; gray when absent

    Returns:
        GaussianCloud with identity rotations and opacity ``cfg.init_opacity``
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bbox)
    if cfg.init_from_sparse and points.shape[0] > 0:
        positions = points.copy()
        colors = np.full_like(positions, 0.5) if colors is None else np.asarray(colors, dtype=np.float64)
        logger.info(f"Initializing {len(positions)} Gaussians from sparse points")
    else:
        positions = rng.uniform(lo, hi, size=(cfg.init_random_points, 3))
        colors = rng.uniform(0.0, 1.0, size=(cfg.init_random_points, 3))
        logger.info(f"Initializing {len(positions)} Gaussians at random points in the scene box")

    n = positions.shape[0]
    scale = nearest_neighbour_scale(positions, (lo, hi))
    sh = np.zeros((n, sh_coeff_count(cfg.sh_degree), 3))
    sh[:, 0, :] = rgb_to_sh_dc(colors)
    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    return GaussianCloud(
        positions=positions,
        rotations=rotations,
        log_scales=np.repeat(np.log(scale)[:, None], 3, axis=1),
        opacity_logits=np.full(n, float(inverse_sigmoid(cfg.init_opacity))),
        sh_coeffs=sh,
        sh_degree=cfg.sh_degree,
    )
