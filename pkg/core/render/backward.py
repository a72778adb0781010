"""Analytic gradients of a rendered frame with respect to Gaussian parameters.

The chain runs back through front-to-back compositing, the per-pixel alpha
falloff, the EWA projection of the covariance, the rotation-scale
factorization and the SH color model. Sort order is treated as constant.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from core.config.settings import RenderSettings
from core.errors import GradientOverflowError, ShapeError
from core.render.rasterizer import RenderedFrame, splat_alpha
from core.scene.camera import Camera
from core.scene.gaussians import PARAM_FIELDS, GaussianCloud, normalize_quaternions, quaternion_to_rotation
from core.scene.sh import sh_basis

logger = logging.getLogger(__name__)


@dataclass
class ParamGrads:
    """Per-Gaussian gradients mirroring the cloud's parameter arrays."""
    positions: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    sh_coeffs: np.ndarray
    means2d: np.ndarray  # (N,2) pixel-space gradient of the splat centre
    means2d_norm: np.ndarray  # (N,) NDC-scaled norm, densification statistic

    @classmethod
    def zeros_like(cls, cloud: GaussianCloud) -> "ParamGrads":
        n = len(cloud)
        return cls(
            positions=np.zeros_like(cloud.positions),
            rotations=np.zeros_like(cloud.rotations),
            log_scales=np.zeros_like(cloud.log_scales),
            opacity_logits=np.zeros_like(cloud.opacity_logits),
            sh_coeffs=np.zeros_like(cloud.sh_coeffs),
            means2d=np.zeros((n, 2)),
            means2d_norm=np.zeros(n),
        )

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def scaled(self, factor: float) -> "ParamGrads":
        return ParamGrads(**{k: v * factor for k, v in self.__dict__.items()})

    def __add__(self, other: "ParamGrads") -> "ParamGrads":
        return ParamGrads(**{k: v + getattr(other, k) for k, v in self.__dict__.items()})

    def check_finite(self) -> None:
        """Raise GradientOverflowError naming the first offending Gaussian."""
        for name, arr in self.params().items():
            if arr.shape[0] == 0:
                continue
            bad = ~np.all(np.isfinite(arr.reshape(arr.shape[0], -1)), axis=1)
            if np.any(bad):
                raise GradientOverflowError(int(np.argmax(bad)), name)


def _suffix_exclusive(x: np.ndarray) -> np.ndarray:
    """Sum over later layers (axis 0), excluding the current one."""
    out = np.zeros_like(x)
    if x.shape[0] > 1:
        out[:-1] = np.cumsum(x[::-1], axis=0)[::-1][1:]
    return out


def _rotation_vjp(q_hat: np.ndarray, gR: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. a unit (w,x,y,z) quaternion given dL/dR."""
    w, x, y, z = q_hat[:, 0], q_hat[:, 1], q_hat[:, 2], q_hat[:, 3]
    G = gR
    gw = 2.0 * (-z * G[:, 0, 1] + y * G[:, 0, 2] + z * G[:, 1, 0]
                - x * G[:, 1, 2] - y * G[:, 2, 0] + x * G[:, 2, 1])
    gx = 2.0 * (y * G[:, 0, 1] + z * G[:, 0, 2] + y * G[:, 1, 0] - 2.0 * x * G[:, 1, 1]
                - w * G[:, 1, 2] + z * G[:, 2, 0] + w * G[:, 2, 1] - 2.0 * x * G[:, 2, 2])
    gy = 2.0 * (-2.0 * y * G[:, 0, 0] + x * G[:, 0, 1] + w * G[:, 0, 2] + x * G[:, 1, 0]
                + z * G[:, 1, 2] - w * G[:, 2, 0] + z * G[:, 2, 1] - 2.0 * y * G[:, 2, 2])
    gz = 2.0 * (-2.0 * z * G[:, 0, 0] - w * G[:, 0, 1] + x * G[:, 0, 2] + w * G[:, 1, 0]
                - 2.0 * z * G[:, 1, 1] + y * G[:, 1, 2] + x * G[:, 2, 0] + y * G[:, 2, 1])
    return np.stack([gw, gx, gy, gz], axis=1)


def backward_render(
    cloud: GaussianCloud,
    cam: Camera,
    frame: RenderedFrame,
    d_color: np.ndarray,
    d_depth: Optional[np.ndarray] = None,
    settings: Optional[RenderSettings] = None,
    d_alpha: Optional[np.ndarray] = None,
) -> ParamGrads:
    """Back-propagate image-space gradients to every Gaussian parameter.

    Args:
        cloud: The cloud that produced ``frame``
        cam: The camera that produced ``frame``
        frame: Forward result holding the contributor layers
        d_color: dL/dcolor, (H,W,3)
        d_depth: dL/ddepth on the normalized depth map, (H,W); None for zero
        settings: Rasterizer constants used by the forward pass
        d_alpha: Optional dL/dalpha, (H,W)

    Returns:
        ParamGrads for every Gaussian; culled Gaussians receive exactly zero

    Raises:
        ShapeError: Gradient maps or cloud do not match the frame.
        GradientOverflowError: A gradient came out non-finite.
    """
    settings = settings or RenderSettings()
    H, W = frame.shape
    n = len(cloud)
    n_pix = H * W
    d_color = np.asarray(d_color, dtype=np.float64)
    if d_color.shape != (H, W, 3):
        raise ShapeError(f"d_color has shape {d_color.shape}, frame is {(H, W, 3)}")
    if d_depth is None:
        d_depth = np.zeros((H, W))
    d_depth = np.asarray(d_depth, dtype=np.float64)
    if d_depth.shape != (H, W):
        raise ShapeError(f"d_depth has shape {d_depth.shape}, frame is {(H, W)}")
    if d_alpha is None:
        d_alpha = np.zeros((H, W))
    d_alpha = np.asarray(d_alpha, dtype=np.float64)
    if d_alpha.shape != (H, W):
        raise ShapeError(f"d_alpha has shape {d_alpha.shape}, frame is {(H, W)}")
    batch = frame.splats
    if len(batch) != n or (cam.height, cam.width) != (H, W):
        raise ShapeError(f"Frame was rendered from {len(batch)} Gaussians at {(H, W)}, "
                         f"got {n} Gaussians and camera {(cam.height, cam.width)}")

    grads = ParamGrads.zeros_like(cloud)
    contrib = frame.contributors
    if n == 0 or contrib.num_layers == 0:
        return grads

    gC = d_color.reshape(n_pix, 3)
    alpha_acc = frame.alpha.reshape(n_pix)
    raw = frame.raw_depth.reshape(n_pix)

    # Normalized depth D = raw / max(alpha, eps)
    norm_active = alpha_acc > settings.eps_norm
    denom = np.maximum(alpha_acc, settings.eps_norm)
    gD = d_depth.reshape(n_pix)
    g_raw = gD / denom
    g_acc = d_alpha.reshape(n_pix) + np.where(norm_active, -gD * raw / denom ** 2, 0.0)

    ids = contrib.splat_ids
    A = contrib.alphas
    T = contrib.transmittance
    T_final = contrib.final_transmittance
    weights = A * T
    colors_ext = np.vstack([batch.colors, np.zeros((1, 3))])
    depths_ext = np.append(batch.depths, 0.0)
    c_layer = colors_ext[ids]  # (K,P,3)
    d_layer = depths_ext[ids]  # (K,P)

    after_c = _suffix_exclusive(c_layer * weights[..., None]) + frame.background[None, None, :] * T_final[None, :, None]
    after_d = _suffix_exclusive(d_layer * weights)
    inv_one_minus = 1.0 / (1.0 - A)

    g_layer_alpha = (
        np.sum(gC[None] * (c_layer * T[..., None] - after_c * inv_one_minus[..., None]), axis=2)
        + g_raw[None] * (d_layer * T - after_d * inv_one_minus)
        + g_acc[None] * T_final[None] * inv_one_minus
    )

    # Flatten contributing layers in (layer, pixel) order
    k_idx, p_idx = np.nonzero(A > 0.0)
    sid = ids[k_idx, p_idx]
    w_flat = weights[k_idx, p_idx]
    g_alpha = g_layer_alpha[k_idx, p_idx]

    g_color = np.stack([np.bincount(sid, weights=gC[p_idx, ch] * w_flat, minlength=n) for ch in range(3)], axis=1)
    g_depth = np.bincount(sid, weights=g_raw[p_idx] * w_flat, minlength=n)

    px = (p_idx % W).astype(np.float64)
    py = (p_idx // W).astype(np.float64)
    alpha, G, dx, dy = splat_alpha(batch, sid, px, py, settings.alpha_max)
    free = batch.opacities[sid] * G < settings.alpha_max
    g_alpha = np.where(free, g_alpha, 0.0)

    g_opacity = np.bincount(sid, weights=g_alpha * G, minlength=n)
    g_q = -0.5 * alpha * g_alpha  # dL/d(quadratic form)
    conic = batch.conics[sid]
    g_mx = np.bincount(sid, weights=-g_q * 2.0 * (conic[:, 0, 0] * dx + conic[:, 0, 1] * dy), minlength=n)
    g_my = np.bincount(sid, weights=-g_q * 2.0 * (conic[:, 0, 1] * dx + conic[:, 1, 1] * dy), minlength=n)
    g_conic = np.zeros((n, 2, 2))
    g_conic[:, 0, 0] = np.bincount(sid, weights=g_q * dx * dx, minlength=n)
    g_conic[:, 0, 1] = np.bincount(sid, weights=g_q * dx * dy, minlength=n)
    g_conic[:, 1, 0] = g_conic[:, 0, 1]
    g_conic[:, 1, 1] = np.bincount(sid, weights=g_q * dy * dy, minlength=n)

    grads.means2d[:, 0] = g_mx
    grads.means2d[:, 1] = g_my
    grads.means2d_norm = np.hypot(g_mx * 0.5 * W, g_my * 0.5 * H)

    vis = batch.visible_indices
    _chain_to_parameters(cloud, cam, batch, vis, grads,
                         g_color[vis], g_depth[vis], g_opacity[vis],
                         np.stack([g_mx, g_my], axis=1)[vis], g_conic[vis])
    grads.check_finite()
    return grads


def _chain_to_parameters(cloud, cam, batch, vis, grads, g_color, g_depth, g_opacity, g_mean2d, g_conic):
    """Carry splat-level gradients back to the 3D parameters of visible Gaussians."""
    if vis.size == 0:
        return
    fx, fy = cam.fx, cam.fy
    Wr = cam.rotation

    # Conic is the inverse of the 2D covariance
    conic = batch.conics[vis]
    g_cov2d = -conic @ g_conic @ conic

    J = batch.jacobians[vis]
    M = J @ Wr
    cov3d = batch.cov3d[vis]
    g_cov3d = np.swapaxes(M, 1, 2) @ g_cov2d @ M
    g_M = 2.0 * g_cov2d @ M @ cov3d
    g_J = g_M @ Wr.T

    t = batch.cam_points[vis]
    x, y, z = t[:, 0], t[:, 1], t[:, 2]
    z2 = z * z
    z3 = z2 * z
    g_t = np.zeros((vis.size, 3))
    g_t[:, 0] = g_J[:, 0, 2] * (-fx / z2)
    g_t[:, 1] = g_J[:, 1, 2] * (-fy / z2)
    g_t[:, 2] = (g_J[:, 0, 0] * (-fx / z2) + g_J[:, 0, 2] * (2.0 * fx * x / z3)
                 + g_J[:, 1, 1] * (-fy / z2) + g_J[:, 1, 2] * (2.0 * fy * y / z3))
    g_t += np.einsum('nij,ni->nj', J, g_mean2d)
    g_t[:, 2] += g_depth
    g_pos = g_t @ Wr

    # SH color, clamped channels pass no gradient
    g_rgb = np.where(batch.color_unclamped[vis], g_color, 0.0)
    Y, dY = sh_basis(batch.view_dirs[vis], cloud.sh_degree, with_grad=True)
    grads.sh_coeffs[vis] = Y[:, :, None] * g_rgb[:, None, :]
    if cloud.sh_degree > 0:
        coeffs = cloud.sh_coeffs[vis]
        g_dir = np.einsum('nc,nkc,nkj->nj', g_rgb, coeffs, dY)
        dirs = batch.view_dirs[vis]
        proj = g_dir - np.sum(g_dir * dirs, axis=1, keepdims=True) * dirs
        g_pos += proj / batch.view_dist[vis][:, None]
    grads.positions[vis] = g_pos

    # Sigma = (R s)(R s)^T
    q_raw = cloud.rotations[vis]
    q_hat = normalize_quaternions(q_raw)
    R = quaternion_to_rotation(q_hat)
    s = cloud.scales[vis]
    Ms = R * s[:, None, :]
    g_Ms = (g_cov3d + np.swapaxes(g_cov3d, 1, 2)) @ Ms
    g_s = np.sum(g_Ms * R, axis=1)
    grads.log_scales[vis] = g_s * s
    g_R = g_Ms * s[:, None, :]
    g_qhat = _rotation_vjp(q_hat, g_R)
    q_norm = np.linalg.norm(q_raw, axis=1, keepdims=True)
    grads.rotations[vis] = (g_qhat - np.sum(g_qhat * q_hat, axis=1, keepdims=True) * q_hat) / q_norm

    o = batch.opacities[vis]
    grads.opacity_logits[vis] = g_opacity * o * (1.0 - o)


def accumulate(grads: Sequence[ParamGrads]) -> ParamGrads:
    """Sum several ParamGrads in order."""
    total = grads[0]
    for g in grads[1:]:
        total = total + g
    return total
