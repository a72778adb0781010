"""Gaussian primitives, the optimizable cloud, and covariance construction."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from core.errors import InvalidParameterError, ShapeError, TrainingStateCorruptError

logger = logging.getLogger(__name__)

PARAM_FIELDS: Tuple[str, ...] = ('positions', 'rotations', 'log_scales', 'opacity_logits', 'sh_coeffs')


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def inverse_sigmoid(p):
    """Logit of a probability in (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    return np.log(p / (1.0 - p))


def sh_coeff_count(degree: int) -> int:
    """Number of SH coefficients per channel for a degree."""
    return (degree + 1) ** 2


def normalize_quaternions(q: np.ndarray) -> np.ndarray:
    """Renormalize (..., 4) quaternions to unit length."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise InvalidParameterError("Zero-length quaternion")
    return q / norm


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrices from unit (w, x, y, z) quaternions, batched over leading axes."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[..., 0, 1] = 2.0 * (x * y - w * z)
    R[..., 0, 2] = 2.0 * (x * z + w * y)
    R[..., 1, 0] = 2.0 * (x * y + w * z)
    R[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[..., 1, 2] = 2.0 * (y * z - w * x)
    R[..., 2, 0] = 2.0 * (x * z - w * y)
    R[..., 2, 1] = 2.0 * (y * z + w * x)
    R[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


def rotation_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Unit (w, x, y, z) quaternion of a rotation matrix, with w >= 0."""
    R = np.asarray(R, dtype=np.float64)
    Rxx, Ryx, Rzx, Rxy, Ryy, Rzy, Rxz, Ryz, Rzz = R.flat
    K = np.array([
        [Rxx - Ryy - Rzz, 0, 0, 0],
        [Ryx + Rxy, Ryy - Rxx - Rzz, 0, 0],
        [Rzx + Rxz, Rzy + Ryz, Rzz - Rxx - Ryy, 0],
        [Ryz - Rzy, Rzx - Rxz, Rxy - Ryx, Rxx + Ryy + Rzz]]) / 3.0
    eigvals, eigvecs = np.linalg.eigh(K)
    q = eigvecs[[3, 0, 1, 2], np.argmax(eigvals)]
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def covariances_from_rs(q: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Batched Sigma = R S S^T R^T for (N,4) quaternions and (N,3) scales."""
    q = np.asarray(q, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(s))):
        raise InvalidParameterError("Non-finite rotation or scale")
    if np.any(s <= 0):
        raise InvalidParameterError("Scales must be positive")
    R = quaternion_to_rotation(normalize_quaternions(q))
    M = R * s[..., None, :]
    cov = M @ np.swapaxes(M, -1, -2)
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


def covariance_from_rs(q: np.ndarray, s: np.ndarray) -> np.ndarray:
    """3x3 covariance R diag(s)^2 R^T of a single Gaussian.

    Args:
        q: Unit quaternion (w, x, y, z); renormalized before use
        s: Positive per-axis scales

    Returns:
        Symmetric positive definite 3x3 matrix
    """
    return covariances_from_rs(np.reshape(q, (1, 4)), np.reshape(s, (1, 3)))[0]


@dataclass
class Gaussian:
    """One anisotropic 3D Gaussian."""
    position: np.ndarray
    rotation: np.ndarray
    log_scale: np.ndarray
    opacity_logit: float
    sh_coeffs: np.ndarray  # ((L+1)^2, 3)

    @property
    def opacity(self) -> float:
        return float(sigmoid(self.opacity_logit))

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    @property
    def covariance(self) -> np.ndarray:
        return covariance_from_rs(self.rotation, self.scale)


@dataclass
class GaussianCloud:
    """Ordered set of Gaussians stored as parallel arrays."""
    positions: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    sh_coeffs: np.ndarray
    sh_degree: int = 0

    def __post_init__(self):
        n = np.asarray(self.positions).shape[0] if np.ndim(self.positions) else 0
        k = sh_coeff_count(self.sh_degree)
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(n, 3)
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(n, 4)
        self.log_scales = np.asarray(self.log_scales, dtype=np.float64).reshape(n, 3)
        self.opacity_logits = np.asarray(self.opacity_logits, dtype=np.float64).reshape(n)
        sh = np.asarray(self.sh_coeffs, dtype=np.float64)
        if sh.size != n * k * 3:
            raise ShapeError(
                f"sh_coeffs has {sh.size} values, expected {n}x{k}x3 for degree {self.sh_degree}"
            )
        self.sh_coeffs = sh.reshape(n, k, 3)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __getitem__(self, index: int) -> Gaussian:
        return Gaussian(
            position=self.positions[index].copy(),
            rotation=self.rotations[index].copy(),
            log_scale=self.log_scales[index].copy(),
            opacity_logit=float(self.opacity_logits[index]),
            sh_coeffs=self.sh_coeffs[index].copy(),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def empty(cls, sh_degree: int = 0) -> "GaussianCloud":
        k = sh_coeff_count(sh_degree)
        return cls(np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)), np.zeros(0),
                   np.zeros((0, k, 3)), sh_degree)

    @classmethod
    def from_gaussians(cls, gaussians: Iterable[Gaussian], sh_degree: int = 0) -> "GaussianCloud":
        """Stack individual Gaussians that share one SH degree."""
        gaussians = list(gaussians)
        if not gaussians:
            return cls.empty(sh_degree)
        k = sh_coeff_count(sh_degree)
        for i, g in enumerate(gaussians):
            if np.size(g.sh_coeffs) != k * 3:
                raise ShapeError(f"Gaussian {i} has {np.size(g.sh_coeffs)} SH values, expected {k * 3}")
        return cls(
            positions=np.stack([g.position for g in gaussians]),
            rotations=np.stack([g.rotation for g in gaussians]),
            log_scales=np.stack([g.log_scale for g in gaussians]),
            opacity_logits=np.array([g.opacity_logit for g in gaussians]),
            sh_coeffs=np.stack([np.reshape(g.sh_coeffs, (k, 3)) for g in gaussians]),
            sh_degree=sh_degree,
        )

    @property
    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    def params(self) -> Dict[str, np.ndarray]:
        """Parameter arrays keyed by group name."""
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def replace_params(self, **arrays: np.ndarray) -> "GaussianCloud":
        """New cloud with some parameter arrays replaced."""
        params = {name: arr.copy() for name, arr in self.params().items()}
        params.update(arrays)
        return GaussianCloud(sh_degree=self.sh_degree, **params)

    def copy(self) -> "GaussianCloud":
        return self.replace_params()

    def select(self, index) -> "GaussianCloud":
        """Subset by boolean mask or integer index array, preserving order."""
        return GaussianCloud(sh_degree=self.sh_degree,
                             **{name: arr[index].copy() for name, arr in self.params().items()})

    def concat(self, other: "GaussianCloud") -> "GaussianCloud":
        if other.sh_degree != self.sh_degree:
            raise ShapeError(f"Cannot concatenate SH degree {other.sh_degree} onto {self.sh_degree}")
        return GaussianCloud(sh_degree=self.sh_degree, **{
            name: np.concatenate([arr, getattr(other, name)], axis=0)
            for name, arr in self.params().items()
        })

    def validate_finite(self) -> None:
        """Raise on the first Gaussian carrying a non-finite parameter."""
        if len(self) == 0:
            return
        for name, arr in self.params().items():
            bad = ~np.all(np.isfinite(arr.reshape(len(self), -1)), axis=1)
            if np.any(bad):
                raise TrainingStateCorruptError(int(np.argmax(bad)), name)

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.positions.min(axis=0), self.positions.max(axis=0)
