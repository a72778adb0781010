"""Pinhole cameras, projection and the virtual right-camera pose."""

import logging
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from core.errors import BehindCameraError, InvalidParameterError

logger = logging.getLogger(__name__)

EPS_DEPTH = 1e-4
ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole intrinsics plus a world-to-camera rigid pose.

    A world point X maps to camera coordinates ``rotation @ X + translation``.
    """
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        rotation.flags.writeable = False
        translation.flags.writeable = False
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)
        self.validate()

    def validate(self) -> None:
        """Check intrinsics and pose invariants."""
        values = [self.fx, self.fy, self.cx, self.cy]
        if not all(np.isfinite(values)) or not np.all(np.isfinite(self.rotation)) \
                or not np.all(np.isfinite(self.translation)):
            raise InvalidParameterError("Camera parameters must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidParameterError(f"Focal lengths must be positive: fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise InvalidParameterError(f"Image size must be positive: {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidParameterError(
                f"Principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )
        R = self.rotation
        if np.max(np.abs(R @ R.T - np.eye(3))) > ORTHONORMAL_TOL or abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL:
            raise InvalidParameterError("Camera rotation must be orthonormal with determinant 1")

    @property
    def shape(self) -> Tuple[int, int]:
        """Image shape as (height, width)."""
        return (self.height, self.width)

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def intrinsics(self) -> np.ndarray:
        """3x3 calibration matrix."""
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def with_pose(self, rotation: np.ndarray, translation: np.ndarray) -> "Camera":
        """Same intrinsics, new pose."""
        return replace(self, rotation=rotation, translation=translation)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Transform (N,3) world points into camera coordinates."""
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def contains(self, pixel: np.ndarray) -> bool:
        """True when a pixel coordinate lies inside the image."""
        u, v = pixel
        return 0.0 <= u < self.width and 0.0 <= v < self.height


def project_point(X: np.ndarray, cam: Camera, eps_depth: float = EPS_DEPTH) -> Tuple[np.ndarray, float]:
    """Project a world point to pixel coordinates.

    Returns:
        Tuple of (pixel (u, v), camera-space depth z)

    Raises:
        BehindCameraError: When z <= eps_depth.
    """
    x, y, z = cam.world_to_camera(np.asarray(X, dtype=np.float64).reshape(1, 3))[0]
    if not z > eps_depth:
        raise BehindCameraError(float(z), eps_depth)
    pixel = np.array([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy])
    return pixel, float(z)


def project_points(points: np.ndarray, cam: Camera) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised projection without the depth check.

    Returns:
        Tuple of (pixels (N,2), depths (N,)); pixels are meaningless where depth <= 0.
    """
    pc = cam.world_to_camera(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    z = pc[:, 2]
    safe_z = np.where(np.abs(z) > 0, z, 1.0)
    pixels = np.stack([cam.fx * pc[:, 0] / safe_z + cam.cx, cam.fy * pc[:, 1] / safe_z + cam.cy], axis=1)
    return pixels, z


def right_pose(cam: Camera, b: float) -> Camera:
    """Companion camera of a rectified stereo pair, shifted by baseline b.

    The companion centre sits b world units along the camera x axis, so its
    camera-frame coordinates are the original ones minus (b, 0, 0). For any
    visible point ``u_left - u_right = fx * b / z >= 0`` and rows coincide.
    """
    if not np.isfinite(b) or b < 0:
        raise InvalidParameterError(f"Baseline must be a finite non-negative value, got {b}")
    if b == 0:
        return cam
    translation = cam.translation - np.array([b, 0.0, 0.0])
    return cam.with_pose(cam.rotation, translation)


def look_at(center: np.ndarray, target: np.ndarray, up: np.ndarray = (0.0, -1.0, 0.0)) -> Tuple[np.ndarray, np.ndarray]:
    """World-to-camera pose of a camera at `center` looking at `target`.

    Camera axes follow the x-right, y-down, z-forward convention.

    Returns:
        Tuple of (rotation (3,3), translation (3,))
    """
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise InvalidParameterError("look_at target coincides with camera centre")
    forward /= norm
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-12:
        raise InvalidParameterError("look_at up vector is parallel to the viewing direction")
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rotation = np.stack([right, down, forward], axis=0)
    translation = -rotation @ center
    return rotation, translation
