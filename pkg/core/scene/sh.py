"""Real spherical harmonics color evaluation up to degree 3."""

from typing import Tuple

import numpy as np

from core.errors import InvalidParameterError, ShapeError

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
         -0.4570457994644658, 1.445305721320277, -0.5900435899266435)
MAX_SH_DEGREE = 3


def rgb_to_sh_dc(rgb: np.ndarray) -> np.ndarray:
    """DC coefficient reproducing a color under the +0.5 offset convention."""
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / SH_C0


def sh_basis(dirs: np.ndarray, degree: int, with_grad: bool = False):
    """Evaluate the real SH basis at unit directions.

    Args:
        dirs: (N,3) unit directions
        degree: 0..3
        with_grad: Also return the (N,K,3) derivative of each basis function
            with respect to the direction components

    Returns:
        (N,K) basis values, plus the derivative array when with_grad is set
    """
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = dirs.shape[0]
    k = (degree + 1) ** 2
    Y = np.zeros((n, k))
    dY = np.zeros((n, k, 3)) if with_grad else None
    Y[:, 0] = SH_C0
    if degree == 0:
        return (Y, dY) if with_grad else Y

    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    Y[:, 1] = -SH_C1 * y
    Y[:, 2] = SH_C1 * z
    Y[:, 3] = -SH_C1 * x
    if with_grad:
        dY[:, 1, 1] = -SH_C1
        dY[:, 2, 2] = SH_C1
        dY[:, 3, 0] = -SH_C1
    if degree == 1:
        return (Y, dY) if with_grad else Y

    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    Y[:, 4] = SH_C2[0] * xy
    Y[:, 5] = SH_C2[1] * yz
    Y[:, 6] = SH_C2[2] * (2.0 * zz - xx - yy)
    Y[:, 7] = SH_C2[3] * xz
    Y[:, 8] = SH_C2[4] * (xx - yy)
    if with_grad:
        dY[:, 4, 0] = SH_C2[0] * y
        dY[:, 4, 1] = SH_C2[0] * x
        dY[:, 5, 1] = SH_C2[1] * z
        dY[:, 5, 2] = SH_C2[1] * y
        dY[:, 6, 0] = -2.0 * SH_C2[2] * x
        dY[:, 6, 1] = -2.0 * SH_C2[2] * y
        dY[:, 6, 2] = 4.0 * SH_C2[2] * z
        dY[:, 7, 0] = SH_C2[3] * z
        dY[:, 7, 2] = SH_C2[3] * x
        dY[:, 8, 0] = 2.0 * SH_C2[4] * x
        dY[:, 8, 1] = -2.0 * SH_C2[4] * y
    if degree == 2:
        return (Y, dY) if with_grad else Y

    Y[:, 9] = SH_C3[0] * y * (3.0 * xx - yy)
    Y[:, 10] = SH_C3[1] * xy * z
    Y[:, 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    Y[:, 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    Y[:, 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    Y[:, 14] = SH_C3[5] * z * (xx - yy)
    Y[:, 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    if with_grad:
        dY[:, 9, 0] = SH_C3[0] * 6.0 * xy
        dY[:, 9, 1] = SH_C3[0] * (3.0 * xx - 3.0 * yy)
        dY[:, 10, 0] = SH_C3[1] * yz
        dY[:, 10, 1] = SH_C3[1] * xz
        dY[:, 10, 2] = SH_C3[1] * xy
        dY[:, 11, 0] = -2.0 * SH_C3[2] * xy
        dY[:, 11, 1] = SH_C3[2] * (4.0 * zz - xx - 3.0 * yy)
        dY[:, 11, 2] = 8.0 * SH_C3[2] * yz
        dY[:, 12, 0] = -6.0 * SH_C3[3] * xz
        dY[:, 12, 1] = -6.0 * SH_C3[3] * yz
        dY[:, 12, 2] = SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)
        dY[:, 13, 0] = SH_C3[4] * (4.0 * zz - 3.0 * xx - yy)
        dY[:, 13, 1] = -2.0 * SH_C3[4] * xy
        dY[:, 13, 2] = 8.0 * SH_C3[4] * xz
        dY[:, 14, 0] = 2.0 * SH_C3[5] * xz
        dY[:, 14, 1] = -2.0 * SH_C3[5] * yz
        dY[:, 14, 2] = SH_C3[5] * (xx - yy)
        dY[:, 15, 0] = SH_C3[6] * (3.0 * xx - 3.0 * yy)
        dY[:, 15, 1] = -6.0 * SH_C3[6] * xy
    return (Y, dY) if with_grad else Y


def sh_to_color(coeffs: np.ndarray, dirs: np.ndarray, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Batched color evaluation.

    Args:
        coeffs: (N,K,3) coefficients
        dirs: (N,3) unit view directions (camera centre to Gaussian)
        degree: SH degree

    Returns:
        Tuple of (colors (N,3) clamped to [0,1], unclamped mask (N,3))
    """
    Y = sh_basis(dirs, degree)
    raw = np.einsum('nk,nkc->nc', Y, coeffs) + 0.5
    inside = (raw >= 0.0) & (raw <= 1.0)
    return np.clip(raw, 0.0, 1.0), inside


def eval_sh(coeffs: np.ndarray, view_dir: np.ndarray, degree: int) -> np.ndarray:
    """RGB color of one Gaussian seen along a view direction.

    Args:
        coeffs: ((degree+1)^2, 3) coefficients (or flat equivalent)
        view_dir: Unit 3-vector
        degree: 0..3

    Returns:
        RGB in [0,1]
    """
    if degree < 0 or degree > MAX_SH_DEGREE:
        raise InvalidParameterError(f"SH degree must be in 0..{MAX_SH_DEGREE}, got {degree}")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    k = (degree + 1) ** 2
    if coeffs.size != k * 3:
        raise ShapeError(f"Degree {degree} needs {k}x3 coefficients, got {coeffs.size} values")
    color, _ = sh_to_color(coeffs.reshape(1, k, 3), np.reshape(view_dir, (1, 3)), degree)
    return color[0]
