"""Sparse points, two-view triangulation and reprojection diagnostics."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from core.errors import BehindCameraError, DegenerateGeometryError, InvalidParameterError
from core.scene.camera import EPS_DEPTH, Camera, project_point

logger = logging.getLogger(__name__)

MIN_TRIANGULATION_ANGLE_DEG = 0.5
MIN_BASELINE = 1e-12


@dataclass(frozen=True)
class Observation:
    """One sighting of a sparse point in a view."""
    view_id: str
    pixel: Tuple[float, float]


@dataclass
class SparsePoint:
    """Triangulated world point with the views that observe it."""
    position: np.ndarray
    observations: List[Observation] = field(default_factory=list)
    color: Tuple[float, float, float] = (0.5, 0.5, 0.5)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)


@dataclass
class ReprojectionReport:
    """Diagnostics gathered while summing reprojection residuals."""
    num_points: int = 0
    num_observations: int = 0
    num_used: int = 0
    behind_camera: List[Tuple[int, str]] = field(default_factory=list)
    max_error: float = 0.0

    @property
    def num_behind(self) -> int:
        return len(self.behind_camera)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "num_points": self.num_points,
            "num_observations": self.num_observations,
            "num_used": self.num_used,
            "num_behind": self.num_behind,
            "behind_camera": [list(x) for x in self.behind_camera],
            "max_error": self.max_error,
        }


def pixel_ray(pixel: Sequence[float], cam: Camera) -> np.ndarray:
    """Unit world-space direction of the ray through a pixel."""
    u, v = pixel
    d_cam = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
    d = cam.rotation.T @ d_cam
    return d / np.linalg.norm(d)


def triangulation_angle(X: np.ndarray, cam_i: Camera, cam_j: Camera) -> float:
    """Angle in degrees subtended at X by the two camera centres."""
    a = cam_i.center - X
    b = cam_j.center - X
    cos = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


def triangulate_two_view(
    x_i: Sequence[float],
    x_j: Sequence[float],
    cam_i: Camera,
    cam_j: Camera,
    min_angle_deg: float = MIN_TRIANGULATION_ANGLE_DEG,
) -> np.ndarray:
    """Midpoint of the shortest segment joining two back-projected rays.

    Args:
        x_i: Pixel in view i
        x_j: Pixel in view j
        cam_i: Camera of view i
        cam_j: Camera of view j
        min_angle_deg: Smallest accepted angle between the rays

    Returns:
        World point (3,)

    Raises:
        DegenerateGeometryError: Coincident centres or near-parallel rays.
    """
    c_i, c_j = cam_i.center, cam_j.center
    if np.linalg.norm(c_i - c_j) < MIN_BASELINE:
        raise DegenerateGeometryError("Camera centres coincide; no baseline to triangulate")

    d_i = pixel_ray(x_i, cam_i)
    d_j = pixel_ray(x_j, cam_j)
    angle = np.degrees(np.arccos(np.clip(abs(np.dot(d_i, d_j)), -1.0, 1.0)))
    if angle < min_angle_deg:
        raise DegenerateGeometryError(
            f"Triangulation angle {angle:.4f} deg below minimum {min_angle_deg} deg"
        )

    w0 = c_i - c_j
    b = np.dot(d_i, d_j)
    d = np.dot(d_i, w0)
    e = np.dot(d_j, w0)
    denom = 1.0 - b * b
    s = (b * e - d) / denom
    t = (e - b * d) / denom
    return 0.5 * ((c_i + s * d_i) + (c_j + t * d_j))


def reprojection_error(
    points: Sequence[SparsePoint],
    cams: Mapping[str, Camera],
) -> Tuple[float, ReprojectionReport]:
    """Sum of squared pixel residuals over every observation.

    Observations whose point lies behind the observing camera are left out
    of the sum and listed in the report.

    Raises:
        InvalidParameterError: An observation references an unknown view.
    """
    report = ReprojectionReport(num_points=len(points))
    total = 0.0
    for p_idx, point in enumerate(points):
        for obs in point.observations:
            report.num_observations += 1
            if obs.view_id not in cams:
                raise InvalidParameterError(
                    f"Point {p_idx} observed in unknown view {obs.view_id!r}"
                )
            try:
                pixel, _ = project_point(point.position, cams[obs.view_id], EPS_DEPTH)
            except BehindCameraError:
                report.behind_camera.append((p_idx, obs.view_id))
                continue
            err = float(np.sum((pixel - np.asarray(obs.pixel, dtype=np.float64)) ** 2))
            total += err
            report.num_used += 1
            report.max_error = max(report.max_error, err)

    if report.num_behind:
        logger.warning(
            f"{report.num_behind} observation(s) behind their camera excluded from reprojection error"
        )
    return total, report
