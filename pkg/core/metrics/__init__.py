"""Training losses and evaluation metrics."""

from core.metrics.evaluation import (
    DepthMetrics,
    ViewSynthesisMetrics,
    eval_depth,
    eval_view_synthesis,
    psnr,
)
from core.metrics.losses import (
    LossBreakdown,
    LossGradients,
    dssim,
    dssim_grad,
    ssim,
    ssim_map,
    total_loss,
)

__all__ = [
    'DepthMetrics',
    'ViewSynthesisMetrics',
    'eval_depth',
    'eval_view_synthesis',
    'psnr',
    'LossBreakdown',
    'LossGradients',
    'dssim',
    'dssim_grad',
    'ssim',
    'ssim_map',
    'total_loss',
]
