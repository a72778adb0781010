"""Gaussian checkpoints in the common splatting PLY layout.

One ``vertex`` element with float32 properties x, y, z, nx, ny, nz,
f_dc_0..2, f_rest_*, opacity, scale_0..2, rot_0..3. Opacity is stored as a
logit and scales as logs; f_rest is channel-major.
"""

import logging
from pathlib import Path
from typing import List, Union

import numpy as np
from plyfile import PlyData, PlyElement

from core.errors import ParseError, SchemaError, ShapeError
from core.scene.gaussians import GaussianCloud, sh_coeff_count
from core.scene.sh import MAX_SH_DEGREE

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BASE_PROPERTIES = (
    ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity"]
    + [f"scale_{i}" for i in range(3)]
    + [f"rot_{i}" for i in range(4)]
)


def ply_property_names(sh_degree: int) -> List[str]:
    """Property names in file order for a given SH degree."""
    n_rest = 3 * (sh_coeff_count(sh_degree) - 1)
    return (
        ["x", "y", "z", "nx", "ny", "nz"]
        + [f"f_dc_{i}" for i in range(3)]
        + [f"f_rest_{i}" for i in range(n_rest)]
        + ["opacity"]
        + [f"scale_{i}" for i in range(3)]
        + [f"rot_{i}" for i in range(4)]
    )


def save_gaussians_ply(cloud: GaussianCloud, path: PathLike) -> Path:
    """Write a cloud as a binary little-endian PLY."""
    path = Path(path)
    n = len(cloud)
    k = sh_coeff_count(cloud.sh_degree)
    rest = np.transpose(cloud.sh_coeffs[:, 1:, :], (0, 2, 1)).reshape(n, 3 * (k - 1))
    columns = np.concatenate([
        cloud.positions,
        np.zeros((n, 3)),
        cloud.sh_coeffs[:, 0, :],
        rest,
        cloud.opacity_logits[:, None],
        cloud.log_scales,
        cloud.rotations,
    ], axis=1).astype(np.float32)

    names = ply_property_names(cloud.sh_degree)
    vertices = np.empty(n, dtype=[(name, "f4") for name in names])
    for i, name in enumerate(names):
        vertices[name] = columns[:, i]
    path.parent.mkdir(parents=True, exist_ok=True)
    PlyData([PlyElement.describe(vertices, "vertex")], byte_order="<").write(str(path))
    logger.info(f"Saved {n} Gaussians (SH degree {cloud.sh_degree}) to {path}")
    return path


def load_gaussians_ply(path: PathLike) -> GaussianCloud:
    """Read a cloud written by :func:`save_gaussians_ply` or a compatible tool.

    The SH degree is inferred from the number of ``f_rest_*`` properties.

    Raises:
        ParseError: The file is not a PLY or has no vertex element.
        SchemaError: Required properties are missing.
    """
    path = Path(path)
    try:
        ply = PlyData.read(str(path))
    except Exception as e:
        raise ParseError(f"Cannot read PLY: {e}", path=str(path)) from e
    if "vertex" not in [el.name for el in ply.elements]:
        raise ParseError("PLY has no vertex element", path=str(path))
    vertex = ply["vertex"]
    present = [p.name for p in vertex.properties]

    missing = [name for name in BASE_PROPERTIES if name not in present]
    n_rest = sum(1 for name in present if name.startswith("f_rest_"))
    degree = None
    for d in range(MAX_SH_DEGREE + 1):
        if 3 * (sh_coeff_count(d) - 1) == n_rest:
            degree = d
    if degree is None:
        raise ShapeError(f"{path}: {n_rest} f_rest properties match no SH degree")
    missing += [f"f_rest_{i}" for i in range(n_rest) if f"f_rest_{i}" not in present]
    if missing:
        raise SchemaError(missing)

    def column(name):
        return np.asarray(vertex[name], dtype=np.float64)

    n = len(vertex.data)
    k = sh_coeff_count(degree)
    sh = np.zeros((n, k, 3))
    sh[:, 0, :] = np.stack([column(f"f_dc_{i}") for i in range(3)], axis=1)
    if k > 1:
        rest = np.stack([column(f"f_rest_{i}") for i in range(n_rest)], axis=1)
        sh[:, 1:, :] = np.transpose(rest.reshape(n, 3, k - 1), (0, 2, 1))

    cloud = GaussianCloud(
        positions=np.stack([column(a) for a in "xyz"], axis=1),
        rotations=np.stack([column(f"rot_{i}") for i in range(4)], axis=1),
        log_scales=np.stack([column(f"scale_{i}") for i in range(3)], axis=1),
        opacity_logits=column("opacity"),
        sh_coeffs=sh,
        sh_degree=degree,
    )
    logger.info(f"Loaded {n} Gaussians (SH degree {degree}) from {path}")
    return cloud
