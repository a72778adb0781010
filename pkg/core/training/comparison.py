"""Test-view evaluation of trained clouds and the prior-mode comparison study."""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from core.config.settings import PriorMode, RenderSettings, TrainConfig
from core.errors import ConfigurationError, EmptyEvaluationError
from core.io.dataset import Dataset, View
from core.metrics.evaluation import eval_depth, eval_view_synthesis
from core.priors.providers import build_prior_provider
from core.render.rasterizer import render_frame
from core.scene.gaussians import GaussianCloud
from core.training.trainer import train

logger = logging.getLogger(__name__)

METRIC_FIELDS = ("abs_rel", "rmse", "delta_1_25", "ssim", "psnr", "num_gaussians")
DEPTH_MASK_RULE = "gt_depth > 0 and rendered alpha > alpha_mask"


@dataclass
class EvalResult:
    """View-averaged metrics of one cloud; depth fields are None without ground truth."""
    abs_rel: Optional[float]
    rmse: Optional[float]
    delta_1_25: Optional[float]
    ssim: float
    psnr: float
    num_gaussians: int
    num_views: int
    per_view: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def to_dict(self, include_views: bool = True) -> Dict[str, Any]:
        out = asdict(self)
        if not include_views:
            out.pop("per_view")
        out["depth_normalized"] = True
        out["median_scaled"] = False
        out["depth_mask"] = DEPTH_MASK_RULE
        return out


def evaluate_cloud(cloud: GaussianCloud, views: Sequence[View], settings: Optional[RenderSettings] = None,
                   background=(0.0, 0.0, 0.0)) -> EvalResult:
    """Render every view and average depth and image metrics over views.

    Depth is the alpha-normalized rendered depth, compared without median
    scaling on pixels with ground truth that the cloud covers.

    Raises:
        EmptyEvaluationError: No view to evaluate.
    """
    settings = settings or RenderSettings()
    if not views:
        raise EmptyEvaluationError("No views to evaluate")
    per_view: Dict[str, Dict[str, float]] = {}
    depth_rows, image_rows = [], []
    for view in views:
        frame = render_frame(cloud, view.camera, background, settings)
        image = eval_view_synthesis(frame.color, view.image)
        image_rows.append(image)
        per_view[view.id] = image.to_dict()
        if view.gt_depth is None:
            continue
        try:
            depth = eval_depth(frame.depth, view.gt_depth, frame.depth_mask(settings.alpha_mask))
        except EmptyEvaluationError:
            logger.warning(f"View {view.id}: rendered cloud covers no ground-truth pixel")
            continue
        depth_rows.append(depth)
        per_view[view.id].update(depth.to_dict())

    def mean(rows, name):
        return float(np.mean([getattr(r, name) for r in rows])) if rows else None

    return EvalResult(
        abs_rel=mean(depth_rows, "abs_rel"),
        rmse=mean(depth_rows, "rmse"),
        delta_1_25=mean(depth_rows, "delta_1_25"),
        ssim=mean(image_rows, "ssim"),
        psnr=mean(image_rows, "psnr"),
        num_gaussians=len(cloud),
        num_views=len(views),
        per_view=per_view,
    )


@dataclass
class ComparisonRow:
    """Seed-averaged metrics of one prior mode."""
    mode: str
    seeds: List[int]
    abs_rel: Optional[float]
    rmse: Optional[float]
    delta_1_25: Optional[float]
    ssim: float
    psnr: float
    num_gaussians: float
    runs: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def format_table(rows: Sequence[ComparisonRow]) -> str:
    """Plain-text table with one line per mode."""
    header = f"{'mode':<10}" + "".join(f"{name:>14}" for name in METRIC_FIELDS)
    lines = [header]
    for row in rows:
        cells = []
        for name in METRIC_FIELDS:
            value = getattr(row, name)
            cells.append(f"{'-':>14}" if value is None else f"{value:>14.4f}")
        lines.append(f"{row.mode:<10}" + "".join(cells))
    return "\n".join(lines)


def run_comparison(
    dataset: Dataset,
    cfg: TrainConfig,
    modes: Sequence[PriorMode] = (PriorMode.NONE, PriorMode.SFM, PriorMode.STEREO),
    seeds: Sequence[int] = (0,),
) -> List[ComparisonRow]:
    """Train one cloud per prior mode and seed, evaluate on the test views.

    The ``none`` mode trains with lambda2 = 0. Test views default to the
    training views when the dataset has no test split.
    """
    if not seeds:
        raise ConfigurationError("run_comparison needs at least one seed")
    eval_views = dataset.test_views or dataset.train_views
    rows = []
    for mode in modes:
        mode = PriorMode(mode)
        runs = []
        for seed in seeds:
            update: Dict[str, Any] = {"prior_mode": mode, "seed": int(seed)}
            if mode == PriorMode.NONE:
                update["lambda2"] = 0.0
            run_cfg = cfg.model_copy(update=update)
            logger.info(f"Comparison run: prior {mode.value}, seed {seed}")
            provider = build_prior_provider(mode, dataset, run_cfg)
            cloud, _ = train(dataset, run_cfg, provider)
            result = evaluate_cloud(cloud, eval_views, run_cfg.render, run_cfg.background)
            runs.append(result.to_dict(include_views=False))

        def mean(name):
            values = [r[name] for r in runs if r[name] is not None]
            return float(np.mean(values)) if values else None

        rows.append(ComparisonRow(
            mode=mode.value,
            seeds=[int(s) for s in seeds],
            abs_rel=mean("abs_rel"),
            rmse=mean("rmse"),
            delta_1_25=mean("delta_1_25"),
            ssim=mean("ssim"),
            psnr=mean("psnr"),
            num_gaussians=mean("num_gaussians"),
            runs=runs,
        ))
    logger.info("Comparison complete\n" + format_table(rows))
    return rows
