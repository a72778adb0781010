"""Front-to-back alpha compositing of projected splats."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.config.settings import RenderSettings
from core.errors import ShapeError
from core.render.splats import SplatBatch, project_cloud
from core.scene.camera import Camera
from core.scene.gaussians import GaussianCloud

logger = logging.getLogger(__name__)


@dataclass
class Contributors:
    """Per-pixel contributor layers, front to back.

    Layer k of pixel p holds the k-th nearest splat overlapping p. Arrays
    have shape (K, H*W); padding entries carry splat index -1 and zero alpha.
    Only splats traversed before the transmittance dropped below T_stop have
    non-zero alpha.
    """
    splat_ids: np.ndarray  # (K,P) int
    alphas: np.ndarray  # (K,P) effective alpha
    transmittance: np.ndarray  # (K,P) transmittance in front of the layer
    final_transmittance: np.ndarray  # (P,)

    @property
    def num_layers(self) -> int:
        return self.splat_ids.shape[0]

    def at(self, row: int, col: int, width: int) -> List[Tuple[int, float, float]]:
        """(splat index, alpha, transmittance) of the contributors of one pixel."""
        p = row * width + col
        out = []
        for k in range(self.num_layers):
            sid = int(self.splat_ids[k, p])
            if sid < 0 or self.alphas[k, p] == 0.0:
                continue
            out.append((sid, float(self.alphas[k, p]), float(self.transmittance[k, p])))
        return out


@dataclass
class RenderedFrame:
    """Output of one forward render."""
    color: np.ndarray  # (H,W,3)
    depth: np.ndarray  # (H,W) alpha-normalized
    raw_depth: np.ndarray  # (H,W)
    alpha: np.ndarray  # (H,W)
    contributors: Contributors
    splats: SplatBatch
    background: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.alpha.shape

    def depth_mask(self, alpha_mask: float = 0.5) -> np.ndarray:
        """Pixels where the normalized depth is trusted."""
        return self.alpha > alpha_mask


def _pixel_overlaps(batch: SplatBatch, width: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Enumerate (splat, x, y) for every pixel inside each visible splat's box."""
    vis = batch.visible_indices
    if vis.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    x0, y0, x1, y1 = batch.bbox[vis].T
    wx = x1 - x0
    counts = wx * (y1 - y0)
    splat_of = np.repeat(vis, counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    local = np.arange(splat_of.size) - starts
    wx_rep = np.repeat(wx, counts)
    px = np.repeat(x0, counts) + local % wx_rep
    py = np.repeat(y0, counts) + local // wx_rep
    return splat_of, px, py


def splat_alpha(batch: SplatBatch, splat_of: np.ndarray, px: np.ndarray, py: np.ndarray,
                alpha_max: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-overlap alpha.

    Returns:
        Tuple of (alpha clamped to alpha_max, Gaussian falloff G, dx, dy)
    """
    dx = px - batch.means2d[splat_of, 0]
    dy = py - batch.means2d[splat_of, 1]
    conic = batch.conics[splat_of]
    power = -0.5 * (conic[:, 0, 0] * dx * dx + 2.0 * conic[:, 0, 1] * dx * dy + conic[:, 1, 1] * dy * dy)
    G = np.exp(power)
    alpha = np.minimum(batch.opacities[splat_of] * G, alpha_max)
    return alpha, G, dx, dy


def depth_order(depths: np.ndarray) -> np.ndarray:
    """Rank of each splat in ascending depth, ties broken by index."""
    order = np.lexsort((np.arange(depths.size), depths))
    rank = np.empty(depths.size, dtype=np.int64)
    rank[order] = np.arange(depths.size)
    return rank


def composite(batch: SplatBatch, height: int, width: int, settings: RenderSettings) -> Contributors:
    """Sort overlaps per pixel and apply the early-stop transmittance rule."""
    n_pix = height * width
    splat_of, px, py = _pixel_overlaps(batch, width)
    if splat_of.size == 0:
        return Contributors(
            splat_ids=np.full((0, n_pix), -1, dtype=np.int64),
            alphas=np.zeros((0, n_pix)),
            transmittance=np.zeros((0, n_pix)),
            final_transmittance=np.ones(n_pix),
        )

    alpha, _, _, _ = splat_alpha(batch, splat_of, px, py, settings.alpha_max)
    pix = py * width + px
    rank = depth_order(np.where(batch.visible, batch.depths, np.inf))
    order = np.lexsort((rank[splat_of], pix))
    splat_of, pix, alpha = splat_of[order], pix[order], alpha[order]

    m = pix.size
    idx = np.arange(m)
    group_start = np.maximum.accumulate(np.where(np.r_[True, pix[1:] != pix[:-1]], idx, 0))
    layer = idx - group_start
    K = int(layer.max()) + 1

    A = np.zeros((K, n_pix))
    S = np.full((K, n_pix), -1, dtype=np.int64)
    A[layer, pix] = alpha
    S[layer, pix] = splat_of

    T_before = np.ones((K, n_pix))
    if K > 1:
        T_before[1:] = np.cumprod(1.0 - A, axis=0)[:-1]
    A_eff = np.where(T_before >= settings.t_stop, A, 0.0)
    T_eff = np.ones((K, n_pix))
    T_incl = np.cumprod(1.0 - A_eff, axis=0)
    if K > 1:
        T_eff[1:] = T_incl[:-1]
    return Contributors(splat_ids=S, alphas=A_eff, transmittance=T_eff, final_transmittance=T_incl[-1])


def render_frame(cloud: GaussianCloud, cam: Camera, background: Sequence[float] = (0.0, 0.0, 0.0),
                 settings: Optional[RenderSettings] = None) -> RenderedFrame:
    """Render color, depth and alpha of a cloud seen from a camera.

    Args:
        cloud: Gaussians to render (may be empty)
        cam: Camera
        background: RGB composited behind the splats
        settings: Rasterizer constants

    Returns:
        RenderedFrame with contributor layers retained for the backward pass

    Raises:
        TrainingStateCorruptError: A Gaussian carries a non-finite parameter.
    """
    settings = settings or RenderSettings()
    bg = np.asarray(background, dtype=np.float64)
    if bg.shape != (3,):
        raise ShapeError(f"Background must be an RGB triple, got shape {bg.shape}")
    cloud.validate_finite()

    H, W = cam.height, cam.width
    batch = project_cloud(cloud, cam, settings)
    contrib = composite(batch, H, W, settings)

    weights = contrib.alphas * contrib.transmittance
    ids = contrib.splat_ids
    colors_ext = np.vstack([batch.colors, np.zeros((1, 3))])
    depths_ext = np.append(batch.depths, 0.0)

    T_final = contrib.final_transmittance
    color = np.sum(colors_ext[ids] * weights[..., None], axis=0) + bg[None, :] * T_final[:, None]
    raw = np.sum(depths_ext[ids] * weights, axis=0)
    alpha = 1.0 - T_final
    depth = raw / np.maximum(alpha, settings.eps_norm)

    logger.debug(f"Rendered {int(batch.visible.sum())}/{len(cloud)} splats, {contrib.num_layers} layers")
    return RenderedFrame(
        color=color.reshape(H, W, 3),
        depth=depth.reshape(H, W),
        raw_depth=raw.reshape(H, W),
        alpha=alpha.reshape(H, W),
        contributors=contrib,
        splats=batch,
        background=bg,
    )
