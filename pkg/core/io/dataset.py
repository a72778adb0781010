"""Posed image datasets with sparse points and a train/test split."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from core.errors import InvalidParameterError, ShapeError
from core.scene.camera import Camera
from core.scene.geometry import SparsePoint

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class View:
    """One posed training or test image."""
    id: str
    image: np.ndarray  # (H,W,3) in [0,1]
    camera: Camera
    gt_depth: Optional[np.ndarray] = None  # (H,W), 0 where undefined

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        if self.image.shape != (self.camera.height, self.camera.width, 3):
            raise ShapeError(
                f"View {self.id}: image {self.image.shape} does not match camera "
                f"{(self.camera.height, self.camera.width, 3)}"
            )
        if self.gt_depth is not None:
            self.gt_depth = np.asarray(self.gt_depth, dtype=np.float64)
            if self.gt_depth.shape != self.camera.shape:
                raise ShapeError(f"View {self.id}: gt depth {self.gt_depth.shape} vs camera {self.camera.shape}")

    @property
    def shape(self):
        return self.camera.shape


@dataclass
class Dataset:
    """Posed views, sparse points and the train/test split."""
    views: List[View]
    points: List[SparsePoint] = field(default_factory=list)
    train_ids: Optional[List[str]] = None
    test_ids: List[str] = field(default_factory=list)
    prior_dir: Optional[Path] = None
    name: str = "dataset"

    def __post_init__(self):
        ids = [v.id for v in self.views]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise InvalidParameterError(f"Duplicate view ids: {dupes}")
        known = set(ids)
        for p_idx, point in enumerate(self.points):
            for obs in point.observations:
                if obs.view_id not in known:
                    raise InvalidParameterError(f"Point {p_idx} observed in unknown view {obs.view_id!r}")
        if self.train_ids is None:
            self.train_ids = [i for i in ids if i not in set(self.test_ids)]
        for i in list(self.train_ids) + list(self.test_ids):
            if i not in known:
                raise InvalidParameterError(f"Split references unknown view {i!r}")

    def view(self, view_id: str) -> View:
        for v in self.views:
            if v.id == view_id:
                return v
        raise InvalidParameterError(f"Unknown view {view_id!r}")

    @property
    def train_views(self) -> List[View]:
        return [self.view(i) for i in self.train_ids]

    @property
    def test_views(self) -> List[View]:
        return [self.view(i) for i in self.test_ids]

    @property
    def cameras(self) -> Dict[str, Camera]:
        return {v.id: v.camera for v in self.views}

    def point_array(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.stack([p.position for p in self.points])

    def point_colors(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.array([p.color for p in self.points], dtype=np.float64)

    def camera_extent(self) -> float:
        """Radius of the sphere around the camera centres, padded by 10%."""
        centers = np.stack([v.camera.center for v in self.views])
        mean = centers.mean(axis=0)
        radius = float(np.max(np.linalg.norm(centers - mean, axis=1)))
        return 1.1 * radius if radius > 0 else 1.0

    def bounding_box(self, margin: float = 0.1):
        """Box around the sparse points, or the cameras when there are none."""
        pts = self.point_array()
        if pts.shape[0] == 0:
            pts = np.stack([v.camera.center for v in self.views])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = margin * np.maximum(hi - lo, 1e-6)
        return lo - pad, hi + pad
