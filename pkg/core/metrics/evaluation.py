"""Depth and view-synthesis evaluation metrics."""

import logging
from typing import Any, Dict, NamedTuple, Optional

import numpy as np

from core.errors import EmptyEvaluationError, ShapeError
from core.metrics.losses import ssim

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0
MSE_FLOOR = 1e-10
DELTA_THRESHOLD = 1.25


class DepthMetrics(NamedTuple):
    abs_rel: float
    rmse: float
    delta_1_25: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self._asdict())


class ViewSynthesisMetrics(NamedTuple):
    psnr: float
    ssim: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self._asdict())


def eval_depth(pred: np.ndarray, gt: np.ndarray, mask: Optional[np.ndarray] = None) -> DepthMetrics:
    """Abs Rel, RMSE and the delta < 1.25 inlier ratio over a mask.

    Args:
        pred: Predicted depth (H,W)
        gt: Ground-truth depth (H,W)
        mask: Evaluation pixels; defaults to gt > 0

    Raises:
        EmptyEvaluationError: No pixel with positive ground truth in the mask.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"eval_depth: prediction {pred.shape} vs ground truth {gt.shape}")
    mask = np.ones(gt.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != gt.shape:
        raise ShapeError(f"eval_depth: mask {mask.shape} vs ground truth {gt.shape}")
    mask = mask & (gt > 0)
    if not mask.any():
        raise EmptyEvaluationError("Depth evaluation mask selects no pixels")

    p, g = pred[mask], gt[mask]
    abs_rel = float(np.mean(np.abs(p - g) / g))
    rmse = float(np.sqrt(np.mean((p - g) ** 2)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(p / g, g / p)
    delta = float(np.mean(np.where(p > 0, ratio, np.inf) < DELTA_THRESHOLD))
    return DepthMetrics(abs_rel=abs_rel, rmse=rmse, delta_1_25=delta)


def psnr(pred: np.ndarray, gt: np.ndarray) -> float:
    """PSNR in dB for images in [0,1], capped for near-identical inputs."""
    mse = float(np.mean((np.asarray(pred, dtype=np.float64) - np.asarray(gt, dtype=np.float64)) ** 2))
    if mse < MSE_FLOOR:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))


def eval_view_synthesis(pred: np.ndarray, gt: np.ndarray) -> ViewSynthesisMetrics:
    """PSNR and SSIM of a rendered view against its ground truth."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"eval_view_synthesis: prediction {pred.shape} vs ground truth {gt.shape}")
    return ViewSynthesisMetrics(psnr=psnr(pred, gt), ssim=ssim(pred, gt))
