"""Static depth priors: projected SfM points, aligned external maps and ground truth."""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import DegenerateFitError, EmptyPriorError, ShapeError
from core.io.dataset import View
from core.io.pfm import read_pfm
from core.priors.types import DepthPrior, PriorCache, PriorSource
from core.scene.camera import EPS_DEPTH, Camera
from core.scene.gaussians import GaussianCloud
from core.scene.geometry import SparsePoint

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 2
FIT_VARIANCE_EPS = 1e-12


def _as_positions(points) -> np.ndarray:
    if len(points) and isinstance(points[0], SparsePoint):
        return np.stack([p.position for p in points])
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)


def sparse_prior_from_points(points: Union[Sequence[SparsePoint], np.ndarray], cam: Camera,
                             created_at: int = 0) -> DepthPrior:
    """Project points into a camera, keeping the nearest depth per rounded pixel.

    Raises:
        EmptyPriorError: No point projects inside the image in front of the camera.
    """
    positions = _as_positions(points)
    H, W = cam.shape
    pc = cam.world_to_camera(positions)
    z = pc[:, 2]
    front = z > EPS_DEPTH
    safe_z = np.where(front, z, 1.0)
    u = np.rint(cam.fx * pc[:, 0] / safe_z + cam.cx)
    v = np.rint(cam.fy * pc[:, 1] / safe_z + cam.cy)
    keep = front & (u >= 0) & (u < W) & (v >= 0) & (v < H)
    if not np.any(keep):
        raise EmptyPriorError(f"None of {len(positions)} points projects into the {W}x{H} view")

    flat = np.full(H * W, np.inf)
    np.minimum.at(flat, v[keep].astype(np.int64) * W + u[keep].astype(np.int64), z[keep])
    valid = np.isfinite(flat)
    depth = np.where(valid, flat, 0.0).reshape(H, W)
    return DepthPrior(depth=depth, valid=valid.reshape(H, W), source=PriorSource.SFM_SPARSE,
                      created_at=created_at)


def fit_scale_shift(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Least-squares (m, q) minimising Σ (m·x + q − y)².

    Raises:
        DegenerateFitError: Fewer than two samples or no spread in x.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ShapeError(f"fit_scale_shift needs equal sample counts, got {x.size} and {y.size}")
    if x.size < MIN_FIT_POINTS:
        raise DegenerateFitError(f"Scale/shift fit needs at least {MIN_FIT_POINTS} points, got {x.size}")
    mx, my = x.mean(), y.mean()
    dx = x - mx
    sxx = float(dx @ dx)
    if sxx <= FIT_VARIANCE_EPS * max(1.0, float(x @ x)):
        raise DegenerateFitError("Predicted depth has no variance at the sparse samples")
    m = float(dx @ (y - my)) / sxx
    return m, float(my - m * mx)


def align_external_prior(pred: np.ndarray, sparse: DepthPrior, pred_valid: Optional[np.ndarray] = None,
                         created_at: int = 0) -> DepthPrior:
    """Align a relative depth map to sparse metric depth with a scale and a shift.

    Args:
        pred: (H,W) relative depth
        sparse: Sparse metric targets on the same grid
        pred_valid: Pixels where ``pred`` is defined (default: finite pixels)
        created_at: Iteration stamp of the result

    Returns:
        DepthPrior m·pred + q, valid where that is positive

    Raises:
        ShapeError: Grids differ.
        DegenerateFitError: Fewer than two usable samples or constant pred at them.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != sparse.shape:
        raise ShapeError(f"Predicted depth {pred.shape} and sparse prior {sparse.shape} differ")
    defined = np.isfinite(pred) if pred_valid is None else (np.asarray(pred_valid, dtype=bool) & np.isfinite(pred))
    samples = sparse.valid & defined
    m, q = fit_scale_shift(pred[samples], sparse.depth[samples])
    aligned = np.where(defined, m * np.where(defined, pred, 0.0) + q, 0.0)
    valid = defined & (aligned > 0)
    logger.debug(f"Aligned external depth on {int(samples.sum())} samples: m={m:.6g}, q={q:.6g}")
    return DepthPrior(depth=aligned, valid=valid, source=PriorSource.EXTERNAL_ALIGNED, created_at=created_at)


class StaticPriorProvider:
    """Serves one prior per view from ``depth_start`` on, built at first request."""

    def __init__(self, depth_start: int):
        self.depth_start = depth_start
        self.cache = PriorCache()

    def get(self, view: View, cloud: GaussianCloud, iteration: int,
            rng: Optional[np.random.Generator] = None) -> Optional[DepthPrior]:
        if iteration < self.depth_start:
            return None
        if view.id in self.cache:
            self.cache.stats.cache_hits += 1
            return self.cache.get(view.id)
        try:
            prior = self.build(view, iteration)
        except EmptyPriorError:
            self.cache.stats.failures += 1
            raise
        self.cache.put(view.id, prior)
        return prior

    def build(self, view: View, iteration: int) -> DepthPrior:
        raise NotImplementedError


class SparsePriorProvider(StaticPriorProvider):
    """Sparse SfM depth; each view uses the points observed in it when tracks exist."""

    def __init__(self, points: Sequence[SparsePoint], depth_start: int):
        super().__init__(depth_start)
        self.points = list(points)

    def points_for(self, view_id: str) -> list:
        observed = [p for p in self.points if any(o.view_id == view_id for o in p.observations)]
        return observed or self.points

    def build(self, view: View, iteration: int) -> DepthPrior:
        points = self.points_for(view.id)
        if not points:
            raise EmptyPriorError(f"No sparse points for view {view.id}")
        return sparse_prior_from_points(points, view.camera, created_at=iteration)


class ExternalPriorProvider(SparsePriorProvider):
    """Dense ``<view_id>.pfm`` maps, read once and aligned to the sparse points per view."""

    def __init__(self, prior_dir: Union[str, Path], views: Sequence[View],
                 points: Sequence[SparsePoint], depth_start: int):
        super().__init__(points, depth_start)
        self.prior_dir = Path(prior_dir)
        self.maps: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
        for view in views:
            path = self.prior_dir / f"{view.id}.pfm"
            if not path.exists():
                logger.warning(f"No external prior for view {view.id} at {path}")
                continue
            pred, valid = read_pfm(path)
            if pred.shape != view.shape:
                raise ShapeError(f"External prior {path} is {pred.shape}, view {view.id} is {view.shape}")
            self.maps[view.id] = (pred.astype(np.float64), valid)
        logger.info(f"Read {len(self.maps)} external priors from {self.prior_dir}")

    def build(self, view: View, iteration: int) -> DepthPrior:
        if view.id not in self.maps:
            raise EmptyPriorError(f"No external prior for view {view.id}")
        pred, valid = self.maps[view.id]
        sparse = super().build(view, iteration)
        try:
            return align_external_prior(pred, sparse, valid, created_at=iteration)
        except DegenerateFitError as e:
            raise EmptyPriorError(f"Cannot align external prior of {view.id}: {e}") from e


class OraclePriorProvider(StaticPriorProvider):
    """Ground-truth depth of the dataset, the upper bound of any prior."""

    def build(self, view: View, iteration: int) -> DepthPrior:
        if view.gt_depth is None:
            raise EmptyPriorError(f"View {view.id} has no ground-truth depth")
        valid = view.gt_depth > 0
        return DepthPrior(depth=view.gt_depth, valid=valid, source=PriorSource.GT_ORACLE, created_at=iteration)
