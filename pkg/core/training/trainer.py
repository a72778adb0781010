"""Training loop with scheduled depth supervision, and the JSON-lines run report."""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from core.config.settings import TrainConfig
from core.errors import ConfigurationError, EmptyPriorError, ParseError
from core.io.dataset import Dataset
from core.metrics.losses import total_loss
from core.priors.providers import PriorProvider
from core.render.backward import backward_render
from core.render.rasterizer import render_frame
from core.scene.gaussians import GaussianCloud
from core.training.density import DensifyStats, densify_and_prune
from core.training.init import initialize_cloud
from core.training.optimizer import OptimizerState, adam_step, learning_rates

logger = logging.getLogger(__name__)

LOG_EVERY = 100


@dataclass
class IterationRecord:
    """Losses and cloud size after one optimization step."""
    iteration: int
    view: str
    l1: float
    dssim: float
    depth_loss: float
    total: float
    num_gaussians: int
    depth_valid_fraction: float
    prior_created_at: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunReport:
    """Everything a run emits besides the cloud."""
    config: Dict[str, Any] = field(default_factory=dict)
    records: List[IterationRecord] = field(default_factory=list)
    densify_events: List[Dict[str, Any]] = field(default_factory=list)
    prior_stats: Optional[Dict[str, Any]] = None
    baseline_interval: Optional[Tuple[float, float]] = None

    @property
    def depth_start_observed(self) -> Optional[int]:
        """First iteration whose depth loss was non-zero."""
        for r in self.records:
            if r.depth_loss != 0.0:
                return r.iteration
        return None

    @property
    def final_num_gaussians(self) -> int:
        return self.records[-1].num_gaussians if self.records else 0

    def summary(self) -> Dict[str, Any]:
        if not self.records:
            return {"iterations": 0}
        first, last = self.records[0], self.records[-1]
        return {
            "iterations": len(self.records),
            "initial_l1": first.l1,
            "final_l1": last.l1,
            "initial_total": first.total,
            "final_total": last.total,
            "depth_loss_first_active": self.depth_start_observed,
            "num_gaussians": last.num_gaussians,
            "densify_steps": len(self.densify_events),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config,
            "summary": self.summary(),
            "records": [r.to_dict() for r in self.records],
            "densify_events": self.densify_events,
            "prior_stats": self.prior_stats,
            "baseline_interval": list(self.baseline_interval) if self.baseline_interval else None,
        }


def train(
    dataset: Dataset,
    cfg: TrainConfig,
    prior_provider: Optional[PriorProvider] = None,
) -> Tuple[GaussianCloud, RunReport]:
    """Optimize a Gaussian cloud against the training views.

    Each step renders one view (views are visited in shuffled epochs),
    applies L1 + D-SSIM and, from ``cfg.depth_start`` on, the depth term
    against the provider's prior, then takes one Adam step. Density control
    runs every ``densify_interval`` steps inside its window. The run is
    deterministic for a given ``cfg.seed``.

    Args:
        dataset: Posed views and sparse points
        cfg: Training config
        prior_provider: Source of depth priors, None to disable depth supervision

    Returns:
        Tuple of (trained cloud, RunReport)

    Raises:
        ConfigurationError: No training view, or depth supervision is
            scheduled (lambda2 > 0 and depth_start < iterations) without a provider.
    """
    views = dataset.train_views
    if not views:
        raise ConfigurationError("Training needs at least one training view")
    depth_scheduled = cfg.lambda2 > 0 and cfg.depth_start < cfg.iterations
    if depth_scheduled and prior_provider is None:
        raise ConfigurationError(
            f"lambda2={cfg.lambda2} from step {cfg.depth_start} needs a depth prior provider"
        )

    rng = np.random.default_rng(cfg.seed)
    extent = dataset.camera_extent()
    cloud = initialize_cloud(dataset.point_array(), dataset.bounding_box(), cfg, rng, dataset.point_colors())
    state = OptimizerState.zeros(cloud)
    stats = DensifyStats.zeros(len(cloud))
    report = RunReport(config=json.loads(cfg.model_dump_json()),
                       baseline_interval=getattr(prior_provider, "baseline_interval", None))
    logger.info(f"Step 1: training {len(cloud)} Gaussians on {len(views)} views for {cfg.iterations} iterations "
                f"(prior {cfg.prior_mode.value}, depth from step {cfg.depth_start})")

    schedule: List[int] = []
    for it in range(cfg.iterations):
        if not schedule:
            schedule = rng.permutation(len(views)).tolist()
        view = views[schedule.pop()]
        frame = render_frame(cloud, view.camera, cfg.background, cfg.render)

        prior = None
        if depth_scheduled and it >= cfg.depth_start:
            try:
                prior = prior_provider.get(view, cloud, it, rng)
            except EmptyPriorError as e:
                logger.warning(f"Step {it}: no depth prior for {view.id}, depth term skipped: {e}")
        lambda2 = cfg.lambda2 if it >= cfg.depth_start else 0.0
        breakdown, map_grads = total_loss(
            view.image, frame.color, prior, frame.depth, frame.depth_mask(cfg.render.alpha_mask),
            cfg.lambda1, lambda2,
        )
        grads = backward_render(cloud, view.camera, frame, map_grads.d_color, map_grads.d_depth, cfg.render)

        in_window = cfg.densify_from <= it < cfg.densify_until
        if in_window:
            stats.update(grads, frame.splats.visible)
        cloud, state = adam_step(cloud, grads, state, learning_rates(it, cfg, extent))

        if in_window and it > cfg.densify_from and it % cfg.densify_interval == 0:
            cloud, state, densified = densify_and_prune(cloud, stats, state, cfg, extent, rng)
            stats = DensifyStats.zeros(len(cloud))
            report.densify_events.append({"iteration": it, **densified.to_dict()})
            logger.info(f"Step {it}: densified to {densified.total} Gaussians "
                        f"(+{densified.cloned} cloned, {densified.split} split, -{densified.pruned} pruned)")

        report.records.append(IterationRecord(
            iteration=it,
            view=view.id,
            l1=breakdown.l1,
            dssim=breakdown.dssim,
            depth_loss=breakdown.depth_l1,
            total=breakdown.total,
            num_gaussians=len(cloud),
            depth_valid_fraction=breakdown.depth_valid_fraction,
            prior_created_at=prior.created_at if prior is not None else None,
        ))
        if it % LOG_EVERY == 0 or it == cfg.iterations - 1:
            logger.info(f"Step {it}: loss {breakdown.total:.5f} (l1 {breakdown.l1:.5f}, "
                        f"depth {breakdown.depth_l1:.5f}), {len(cloud)} Gaussians")

    if prior_provider is not None:
        report.prior_stats = prior_provider.cache.stats.to_dict()
    logger.info(f"Training complete: {report.summary()}")
    return cloud, report


def write_run_report(report: RunReport, path: Union[str, Path]) -> Path:
    """One JSON object per line: header, iterations, densify events, summary."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [{"type": "header", "config": report.config,
              "baseline_interval": list(report.baseline_interval) if report.baseline_interval else None}]
    lines += [{"type": "iteration", **r.to_dict()} for r in report.records]
    lines += [{"type": "densify", **e} for e in report.densify_events]
    lines.append({"type": "summary", "summary": report.summary(), "prior_stats": report.prior_stats})
    with open(path, "w", encoding="utf-8") as fid:
        for line in lines:
            fid.write(json.dumps(line) + "\n")
    return path


def read_run_report(path: Union[str, Path]) -> RunReport:
    """Parse a report written by :func:`write_run_report`.

    Raises:
        ParseError: A line is not JSON or has an unknown type.
    """
    path = Path(path)
    report = RunReport()
    with open(path, "r", encoding="utf-8") as fid:
        for number, text in enumerate(fid, start=1):
            if not text.strip():
                continue
            try:
                entry = json.loads(text)
                kind = entry.pop("type")
            except (json.JSONDecodeError, AttributeError, KeyError) as e:
                raise ParseError(f"Bad run report line: {e}", line_number=number, path=str(path)) from e
            if kind == "header":
                report.config = entry.get("config", {})
                interval = entry.get("baseline_interval")
                report.baseline_interval = tuple(interval) if interval else None
            elif kind == "iteration":
                try:
                    report.records.append(IterationRecord(**entry))
                except TypeError as e:
                    raise ParseError(f"Bad iteration record: {e}", line_number=number, path=str(path)) from e
            elif kind == "densify":
                report.densify_events.append(entry)
            elif kind == "summary":
                report.prior_stats = entry.get("prior_stats")
            else:
                raise ParseError(f"Unknown record type {kind!r}", line_number=number, path=str(path))
    return report
