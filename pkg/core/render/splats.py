"""Projection of 3D Gaussians to screen-space splats."""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.config.settings import RenderSettings
from core.scene.camera import Camera
from core.scene.gaussians import Gaussian, GaussianCloud, covariances_from_rs
from core.scene.sh import sh_to_color

logger = logging.getLogger(__name__)


@dataclass
class Splat2D:
    """Screen-space footprint of one Gaussian."""
    mean: np.ndarray  # (2,) pixels
    cov: np.ndarray  # (2,2) with low-pass floor
    conic: np.ndarray  # inverse of cov
    depth: float
    color: np.ndarray
    opacity: float
    index: int
    bbox: Tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive ends), clipped to image


@dataclass
class SplatBatch:
    """All Gaussians of a cloud projected into one camera.

    Arrays are indexed by the Gaussian's position in the cloud. Entries of
    culled Gaussians are zero-filled and must be ignored; ``visible`` marks
    the survivors. The camera-space means, projection Jacobians and SH
    bookkeeping are kept for the backward pass.
    """
    means2d: np.ndarray  # (N,2)
    cov2d: np.ndarray  # (N,2,2)
    conics: np.ndarray  # (N,2,2)
    depths: np.ndarray  # (N,)
    colors: np.ndarray  # (N,3)
    opacities: np.ndarray  # (N,)
    bbox: np.ndarray  # (N,4) int
    visible: np.ndarray  # (N,) bool
    cam_points: np.ndarray  # (N,3)
    jacobians: np.ndarray  # (N,2,3)
    cov3d: np.ndarray  # (N,3,3)
    view_dirs: np.ndarray  # (N,3) unit, camera centre to mean
    view_dist: np.ndarray  # (N,)
    color_unclamped: np.ndarray  # (N,3) bool

    def __len__(self) -> int:
        return self.means2d.shape[0]

    @property
    def visible_indices(self) -> np.ndarray:
        return np.flatnonzero(self.visible)

    def splat(self, index: int) -> Optional[Splat2D]:
        """Single-splat view, or None when culled."""
        if not self.visible[index]:
            return None
        return Splat2D(
            mean=self.means2d[index].copy(),
            cov=self.cov2d[index].copy(),
            conic=self.conics[index].copy(),
            depth=float(self.depths[index]),
            color=self.colors[index].copy(),
            opacity=float(self.opacities[index]),
            index=index,
            bbox=tuple(int(v) for v in self.bbox[index]),
        )


def project_cloud(cloud: GaussianCloud, cam: Camera,
                  settings: Optional[RenderSettings] = None) -> SplatBatch:
    """Project every Gaussian of a cloud to a 2D splat.

    Args:
        cloud: Gaussians to project
        cam: Target camera
        settings: Rasterizer constants (low-pass floor, bbox extent, eps_depth)

    Returns:
        SplatBatch with culled entries flagged in ``visible``
    """
    settings = settings or RenderSettings()
    n = len(cloud)
    W = cam.rotation

    t = cam.world_to_camera(cloud.positions) if n else np.zeros((0, 3))
    z = t[:, 2]
    in_front = z > settings.eps_depth
    safe_z = np.where(in_front, z, 1.0)
    x, y = t[:, 0], t[:, 1]

    J = np.zeros((n, 2, 3))
    J[:, 0, 0] = cam.fx / safe_z
    J[:, 0, 2] = -cam.fx * x / safe_z ** 2
    J[:, 1, 1] = cam.fy / safe_z
    J[:, 1, 2] = -cam.fy * y / safe_z ** 2

    cov3d = covariances_from_rs(cloud.rotations, cloud.scales) if n else np.zeros((0, 3, 3))
    T = J @ W
    cov2d = T @ cov3d @ np.swapaxes(T, 1, 2)
    cov2d = 0.5 * (cov2d + np.swapaxes(cov2d, 1, 2))
    cov2d[:, 0, 0] += settings.low_pass
    cov2d[:, 1, 1] += settings.low_pass

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    safe_det = np.where(det > 0, det, 1.0)
    conics = np.empty((n, 2, 2))
    conics[:, 0, 0] = c / safe_det
    conics[:, 0, 1] = -b / safe_det
    conics[:, 1, 0] = -b / safe_det
    conics[:, 1, 1] = a / safe_det

    means2d = np.stack([cam.fx * x / safe_z + cam.cx, cam.fy * y / safe_z + cam.cy], axis=1)

    # Largest eigenvalue of the 2x2 covariance bounds the footprint
    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radius = settings.bbox_sigma * np.sqrt(np.maximum(lam_max, 0.0))
    with np.errstate(invalid="ignore", over="ignore"):
        x0 = np.ceil(means2d[:, 0] - radius)
        x1 = np.floor(means2d[:, 0] + radius) + 1
        y0 = np.ceil(means2d[:, 1] - radius)
        y1 = np.floor(means2d[:, 1] + radius) + 1
    bbox_f = np.stack([
        np.clip(x0, 0, cam.width), np.clip(y0, 0, cam.height),
        np.clip(x1, 0, cam.width), np.clip(y1, 0, cam.height),
    ], axis=1)
    bbox_f = np.where(np.isfinite(bbox_f), bbox_f, 0)
    bbox = bbox_f.astype(np.int64)

    visible = in_front & (det > 0) & (bbox[:, 2] > bbox[:, 0]) & (bbox[:, 3] > bbox[:, 1])
    bbox[~visible] = 0

    offset = cloud.positions - cam.center
    dist = np.linalg.norm(offset, axis=1)
    safe_dist = np.where(dist > 0, dist, 1.0)
    dirs = offset / safe_dist[:, None]
    colors, unclamped = sh_to_color(cloud.sh_coeffs, dirs, cloud.sh_degree) if n else (
        np.zeros((0, 3)), np.zeros((0, 3), dtype=bool))

    hidden = ~visible
    for arr in (means2d, cov2d, conics, colors, J):
        arr[hidden] = 0.0
    depths = np.where(visible, z, 0.0)
    opacities = np.where(visible, cloud.opacities, 0.0)

    return SplatBatch(
        means2d=means2d,
        cov2d=cov2d,
        conics=conics,
        depths=depths,
        colors=colors,
        opacities=opacities,
        bbox=bbox,
        visible=visible,
        cam_points=t,
        jacobians=J,
        cov3d=cov3d,
        view_dirs=dirs,
        view_dist=safe_dist,
        color_unclamped=unclamped,
    )


def project_gaussian_2d(g: Gaussian, cam: Camera, settings: Optional[RenderSettings] = None,
                        sh_degree: int = 0) -> Optional[Splat2D]:
    """Project a single Gaussian; None when it is culled."""
    cloud = GaussianCloud.from_gaussians([g], sh_degree=sh_degree)
    return project_cloud(cloud, cam, settings).splat(0)
