"""Photometric and depth training losses with their image-space gradients."""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import ndimage

from core.errors import ShapeError
from core.priors.types import DepthPrior

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1D Gaussian taps."""
    x = np.arange(size) - size // 2
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


_WINDOW = gaussian_window()


def _blur(img: np.ndarray) -> np.ndarray:
    """Separable Gaussian filter over the two image axes with zero padding."""
    out = ndimage.correlate1d(img, _WINDOW, axis=0, mode='constant', cval=0.0)
    return ndimage.correlate1d(out, _WINDOW, axis=1, mode='constant', cval=0.0)


def _check_pair(a: np.ndarray, b: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes differ, {a.shape} vs {b.shape}")
    return a, b


def _ssim_terms(x: np.ndarray, y: np.ndarray):
    mu_x, mu_y = _blur(x), _blur(y)
    sxx = _blur(x * x) - mu_x * mu_x
    syy = _blur(y * y) - mu_y * mu_y
    sxy = _blur(x * y) - mu_x * mu_y
    A1 = 2.0 * mu_x * mu_y + SSIM_C1
    A2 = 2.0 * sxy + SSIM_C2
    B1 = mu_x * mu_x + mu_y * mu_y + SSIM_C1
    B2 = sxx + syy + SSIM_C2
    S = (A1 * A2) / (B1 * B2)
    return S, mu_x, mu_y, A1, A2, B1, B2


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel, per-channel SSIM of two (H,W,C) or (H,W) images."""
    a, b = _check_pair(a, b, "ssim")
    return _ssim_terms(a, b)[0]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM over channels and pixels."""
    return float(np.mean(ssim_map(a, b)))


def dssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural dissimilarity (1 - SSIM) / 2."""
    return (1.0 - ssim(a, b)) / 2.0


def dssim_grad(x: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """D-SSIM of x against y and its gradient with respect to x.

    Returns:
        Tuple of (dssim value, dD/dx with the shape of x)
    """
    x, y = _check_pair(x, y, "dssim")
    S, mu_x, mu_y, A1, A2, B1, B2 = _ssim_terms(x, y)
    # d(mean SSIM)/dS per pixel, then halved and negated for D-SSIM
    g = np.full(S.shape, -0.5 / S.size)

    d_mu = S * (2.0 * mu_y / A1 - 2.0 * mu_y / A2 - 2.0 * mu_x / B1 + 2.0 * mu_x / B2)
    d_xx = -S / B2
    d_xy = 2.0 * S / A2
    grad = _blur(g * d_mu) + 2.0 * x * _blur(g * d_xx) + y * _blur(g * d_xy)
    return (1.0 - float(np.mean(S))) / 2.0, grad


@dataclass
class LossBreakdown:
    """Components of the training objective for one iteration."""
    l1: float
    dssim: float
    depth_l1: float
    total: float
    depth_valid_fraction: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class LossGradients:
    """Gradients of the total loss with respect to the rendered maps."""
    d_color: np.ndarray
    d_depth: np.ndarray


def total_loss(
    target: np.ndarray,
    rendered: np.ndarray,
    prior: Optional[DepthPrior],
    rendered_depth: np.ndarray,
    depth_mask: np.ndarray,
    lambda1: float,
    lambda2: float,
) -> Tuple[LossBreakdown, LossGradients]:
    """Weighted L1 + D-SSIM + masked depth L1, mean-reduced.

    Args:
        target: Ground-truth image I, (H,W,3)
        rendered: Rendered image, (H,W,3)
        prior: Depth prior D_k, or None when depth supervision is inactive
        rendered_depth: Alpha-normalized rendered depth, (H,W)
        depth_mask: Pixels whose rendered depth is trusted (alpha above threshold)
        lambda1: D-SSIM weight in [0,1]
        lambda2: Depth weight

    Returns:
        Tuple of (LossBreakdown, LossGradients)
    """
    target, rendered = _check_pair(target, rendered, "total_loss images")
    H, W = target.shape[:2]
    rendered_depth = np.asarray(rendered_depth, dtype=np.float64)
    depth_mask = np.asarray(depth_mask, dtype=bool)
    if rendered_depth.shape != (H, W) or depth_mask.shape != (H, W):
        raise ShapeError(
            f"Depth map {rendered_depth.shape} / mask {depth_mask.shape} do not match image {(H, W)}"
        )

    diff = rendered - target
    l1 = float(np.mean(np.abs(diff)))
    d_l1 = np.sign(diff) / diff.size
    dssim_value, d_dssim = dssim_grad(rendered, target)

    depth_l1 = 0.0
    valid_fraction = 0.0
    d_depth = np.zeros((H, W))
    if prior is not None:
        if prior.depth.shape != (H, W):
            raise ShapeError(f"Prior depth {prior.depth.shape} does not match image {(H, W)}")
        mask = prior.valid & depth_mask
        count = int(mask.sum())
        valid_fraction = count / float(H * W)
        if count:
            residual = rendered_depth[mask] - prior.depth[mask]
            depth_l1 = float(np.mean(np.abs(residual)))
            if lambda2 != 0.0:
                d_depth[mask] = lambda2 * np.sign(residual) / count
        else:
            logger.warning("Depth prior and render mask do not overlap; depth term is zero")

    total = (1.0 - lambda1) * l1 + lambda1 * dssim_value + lambda2 * depth_l1
    d_color = (1.0 - lambda1) * d_l1 + lambda1 * d_dssim
    breakdown = LossBreakdown(
        l1=l1,
        dssim=dssim_value,
        depth_l1=depth_l1,
        total=total,
        depth_valid_fraction=valid_fraction,
    )
    return breakdown, LossGradients(d_color=d_color, d_depth=d_depth)
