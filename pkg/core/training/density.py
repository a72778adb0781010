"""Adaptive density control: clone, split and prune Gaussians."""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Tuple

import numpy as np

from core.config.settings import TrainConfig
from core.errors import EmptySceneError, ShapeError
from core.render.backward import ParamGrads
from core.scene.gaussians import GaussianCloud, normalize_quaternions, quaternion_to_rotation
from core.training.optimizer import OptimizerState

logger = logging.getLogger(__name__)

SPLIT_CHILDREN = 2


@dataclass
class DensifyStats:
    """Accumulated screen-space position gradient norms since the last densify step."""
    grad_accum: np.ndarray
    count: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "DensifyStats":
        return cls(grad_accum=np.zeros(n), count=np.zeros(n, dtype=np.int64))

    def __len__(self) -> int:
        return self.grad_accum.shape[0]

    def update(self, grads: ParamGrads, visible: np.ndarray) -> None:
        self.grad_accum[visible] += grads.means2d_norm[visible]
        self.count[visible] += 1

    def average(self) -> np.ndarray:
        return np.where(self.count > 0, self.grad_accum / np.maximum(self.count, 1), 0.0)


@dataclass
class DensifyReport:
    cloned: int
    split: int
    pruned: int
    total: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _split_children(cloud: GaussianCloud, idx: np.ndarray, factor: float,
                    rng: np.random.Generator) -> GaussianCloud:
    """Two children per parent, positions drawn from the parent Gaussian, scales shrunk."""
    parents = cloud.select(np.repeat(idx, SPLIT_CHILDREN))
    scales = parents.scales
    R = quaternion_to_rotation(normalize_quaternions(parents.rotations))
    offsets = np.einsum("nij,nj->ni", R, rng.normal(size=scales.shape) * scales)
    return parents.replace_params(
        positions=parents.positions + offsets,
        log_scales=parents.log_scales + np.log(factor),
    )


def densify_and_prune(
    cloud: GaussianCloud,
    stats: DensifyStats,
    state: OptimizerState,
    cfg: TrainConfig,
    extent: float,
    rng: np.random.Generator,
) -> Tuple[GaussianCloud, OptimizerState, DensifyReport]:
    """Grow where the position gradient is large, then drop transparent Gaussians.

    Gaussians whose mean screen-space gradient reaches the threshold are
    cloned when small (max scale <= percent_dense * extent) and split into
    two children at ``split_scale_factor`` times their scale when large.
    Growth stops at ``max_gaussians``, keeping the largest gradients. New
    Gaussians get zeroed moments; pruned ones lose theirs.

    Raises:
        EmptySceneError: Every Gaussian would be pruned.
    """
    n = len(cloud)
    if n == 0:
        raise EmptySceneError("Cannot densify an empty cloud")
    if len(stats) != n or len(state) != n:
        raise ShapeError(f"Density statistics ({len(stats)}) and moments ({len(state)}) "
                         f"do not track the cloud ({n})")

    avg = stats.average()
    selected = np.flatnonzero(avg >= cfg.densify_grad_threshold)
    budget = max(cfg.max_gaussians - n, 0)
    if len(selected) > budget:
        order = np.argsort(-avg[selected], kind="stable")[:budget]
        selected = np.sort(selected[order])
        logger.warning(f"Densification capped at {cfg.max_gaussians} Gaussians")

    small = cloud.scales.max(axis=1) <= cfg.percent_dense * extent
    grow = np.zeros(n, dtype=bool)
    grow[selected] = True
    clone_idx = np.flatnonzero(grow & small)
    split_idx = np.flatnonzero(grow & ~small)

    keep = np.ones(n, dtype=bool)
    keep[split_idx] = False
    grown = cloud.select(keep).concat(cloud.select(clone_idx))
    grown = grown.concat(_split_children(cloud, split_idx, cfg.split_scale_factor, rng))
    state = state.select(keep).extend(len(grown) - int(keep.sum()))

    alive = grown.opacities >= cfg.prune_opacity
    if not np.any(alive):
        raise EmptySceneError(f"Pruning at opacity {cfg.prune_opacity} would remove all {len(grown)} Gaussians")
    pruned = int((~alive).sum())
    if pruned:
        grown = grown.select(alive)
        state = state.select(alive)

    report = DensifyReport(cloned=len(clone_idx), split=len(split_idx), pruned=pruned, total=len(grown))
    logger.debug(f"Densify: {report.to_dict()}")
    return grown, state, report
