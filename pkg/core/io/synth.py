"""Ray-traced synthetic scenes with exact ground-truth depth.

Scenes are made of textured rectangles and axis-aligned boxes seen from a
ring of cameras that look at a common target. Every pixel ray is
intersected analytically, so the stored depth is the exact camera-space z of
the nearest surface.
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import ndimage

from core.errors import ConfigurationError, EmptySceneError
from core.config.settings import build_model
from core.io.dataset import Dataset, View
from core.scene.camera import EPS_DEPTH, Camera, look_at
from core.scene.geometry import Observation, SparsePoint

logger = logging.getLogger(__name__)

Vec3 = Tuple[float, float, float]

NOISE_GRID = 64
VISIBILITY_RTOL = 1e-6
CANDIDATES_PER_POINT = 4


class TextureSpec(BaseModel):
    """Procedural surface texture."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["checker", "noise"] = "noise"
    scale: float = Field(0.25, gt=0)  # world units per checker square / noise cell
    color_a: Vec3 = (0.1, 0.1, 0.1)
    color_b: Vec3 = (0.9, 0.9, 0.9)


class PlaneSpec(BaseModel):
    """Finite rectangle centred at ``center`` with unit ``normal``."""
    model_config = ConfigDict(extra="forbid")

    center: Vec3
    normal: Vec3 = (0.0, 0.0, -1.0)
    size: Tuple[float, float] = (4.0, 4.0)
    up: Vec3 = (0.0, -1.0, 0.0)
    texture: TextureSpec = Field(default_factory=TextureSpec)

    @field_validator("normal")
    @classmethod
    def validate_normal(cls, v):
        if np.linalg.norm(v) == 0:
            raise ValueError("normal must be non-zero")
        return v

    @field_validator("size")
    @classmethod
    def validate_size(cls, v):
        if min(v) <= 0:
            raise ValueError(f"plane size must be positive, got {v}")
        return v


class BoxSpec(BaseModel):
    """Axis-aligned box."""
    model_config = ConfigDict(extra="forbid")

    center: Vec3
    size: Vec3 = (1.0, 1.0, 1.0)
    texture: TextureSpec = Field(default_factory=lambda: TextureSpec(kind="checker"))

    @field_validator("size")
    @classmethod
    def validate_size(cls, v):
        if min(v) <= 0:
            raise ValueError(f"box size must be positive, got {v}")
        return v


class CameraRingSpec(BaseModel):
    """Cameras on a horizontal arc around ``target``, all looking at it.

    The camera at the middle of the arc sits at ``target - (0, -height, radius)``
    and looks along +z.
    """
    model_config = ConfigDict(extra="forbid")

    count: int = Field(1, ge=1)
    radius: float = Field(5.0, gt=0)
    target: Vec3 = (0.0, 0.0, 5.0)
    height: float = 0.0  # camera offset along -y (up)
    arc_degrees: float = Field(60.0, ge=0, le=360)


class SynthSceneSpec(BaseModel):
    """Primitives, camera ring, image size, sparse point count and split."""
    model_config = ConfigDict(extra="forbid")

    name: str = "synth"
    planes: List[PlaneSpec] = Field(default_factory=list)
    boxes: List[BoxSpec] = Field(default_factory=list)
    cameras: CameraRingSpec = Field(default_factory=CameraRingSpec)
    image_size: Tuple[int, int] = (48, 36)  # (width, height)
    focal: Optional[float] = Field(None, gt=0)  # pixels; None: equal to width
    background: Vec3 = (0.0, 0.0, 0.0)
    num_points: int = Field(200, ge=0)
    test_views: List[int] = Field(default_factory=list)
    seed: int = 0

    @field_validator("image_size")
    @classmethod
    def validate_image_size(cls, v):
        if min(v) < 1:
            raise ValueError(f"image size must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def check_split(self):
        count = self.cameras.count
        bad = [i for i in self.test_views if not 0 <= i < count]
        if bad:
            raise ValueError(f"test view indices {bad} outside 0..{count - 1}")
        if len(set(self.test_views)) >= count:
            raise ValueError("at least one view must remain for training")
        return self


def view_id(index: int) -> str:
    return f"view_{index:03d}"


def two_plane_spec(train_views: int = 20, test_views: int = 5, image_size: Tuple[int, int] = (48, 36),
                   seed: int = 0) -> SynthSceneSpec:
    """Textured back wall with a smaller checkered plane floating in front of it.

    Test views are spread evenly through the ring.
    """
    count = train_views + test_views
    step = count / max(test_views, 1)
    test = sorted({int(step * i + step / 2) for i in range(test_views)})
    return SynthSceneSpec(
        name="two_plane",
        planes=[
            PlaneSpec(center=(0.0, 0.0, 7.0), size=(12.0, 9.0),
                      texture=TextureSpec(kind="noise", scale=0.3,
                                          color_a=(0.15, 0.2, 0.35), color_b=(0.95, 0.85, 0.6))),
            PlaneSpec(center=(-0.6, 0.2, 4.5), size=(2.0, 2.4),
                      texture=TextureSpec(kind="checker", scale=0.35,
                                          color_a=(0.8, 0.1, 0.1), color_b=(0.95, 0.95, 0.9))),
        ],
        cameras=CameraRingSpec(count=count, radius=5.0, target=(0.0, 0.0, 5.0), arc_degrees=40.0),
        image_size=image_size,
        num_points=300,
        test_views=test,
        seed=seed,
    )


def load_synth_spec(path: Union[str, Path]) -> SynthSceneSpec:
    """Read a SynthSceneSpec JSON document."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigurationError(f"Scene spec not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in {path}: line {e.lineno}: {e.msg}") from e
    return build_model(SynthSceneSpec, data)


class _Texture:
    def __init__(self, spec: TextureSpec, rng: np.random.Generator):
        self.spec = spec
        self.a = np.asarray(spec.color_a, dtype=np.float64)
        self.b = np.asarray(spec.color_b, dtype=np.float64)
        self.grid = rng.random((NOISE_GRID, NOISE_GRID)) if spec.kind == "noise" else None

    def __call__(self, st: np.ndarray, face: np.ndarray) -> np.ndarray:
        """Colors (M,3) at surface coordinates st (M,2) on faces (M,)."""
        s = st / self.spec.scale
        if self.grid is None:
            mix = ((np.floor(s[:, 0]) + np.floor(s[:, 1]) + face) % 2).astype(np.float64)
        else:
            coords = np.stack([s[:, 1] + 17.0 * face, s[:, 0]])
            mix = ndimage.map_coordinates(self.grid, coords, order=1, mode="grid-wrap")
        return self.a + mix[:, None] * (self.b - self.a)


class _Plane:
    def __init__(self, spec: PlaneSpec, texture: _Texture):
        self.center = np.asarray(spec.center, dtype=np.float64)
        self.normal = np.asarray(spec.normal, dtype=np.float64)
        self.normal /= np.linalg.norm(self.normal)
        a1 = np.cross(np.asarray(spec.up, dtype=np.float64), self.normal)
        if np.linalg.norm(a1) < 1e-12:
            a1 = np.cross((1.0, 0.0, 0.0), self.normal)
        self.a1 = a1 / np.linalg.norm(a1)
        self.a2 = np.cross(self.normal, self.a1)
        self.half = np.asarray(spec.size, dtype=np.float64) / 2.0
        self.texture = texture

    def intersect(self, o: np.ndarray, d: np.ndarray):
        denom = d @ self.normal
        ok = np.abs(denom) > 1e-12
        t = np.where(ok, ((self.center - o) @ self.normal) / np.where(ok, denom, 1.0), np.inf)
        local = o + t[:, None] * d - self.center
        s1 = np.where(ok, local @ self.a1, np.inf)
        s2 = np.where(ok, local @ self.a2, np.inf)
        hit = ok & (t > EPS_DEPTH) & (np.abs(s1) <= self.half[0]) & (np.abs(s2) <= self.half[1])
        st = np.stack([s1 + self.half[0], s2 + self.half[1]], axis=1)
        return np.where(hit, t, np.inf), st, np.zeros(len(t), dtype=np.int64)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        s = rng.uniform(-1.0, 1.0, size=(n, 2)) * self.half
        return self.center + s[:, :1] * self.a1 + s[:, 1:] * self.a2


_OTHER_AXES = np.array([[1, 2], [0, 2], [0, 1]])


class _Box:
    def __init__(self, spec: BoxSpec, texture: _Texture):
        center = np.asarray(spec.center, dtype=np.float64)
        size = np.asarray(spec.size, dtype=np.float64)
        self.lo = center - size / 2.0
        self.hi = center + size / 2.0
        self.texture = texture

    def intersect(self, o: np.ndarray, d: np.ndarray):
        parallel = d == 0
        safe = np.where(parallel, 1.0, d)
        t1 = (self.lo - o) / safe
        t2 = (self.hi - o) / safe
        inside = (o >= self.lo) & (o <= self.hi)
        tmin = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        tmax = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
        t_near = tmin.max(axis=1)
        t_far = tmax.min(axis=1)
        axis = tmin.argmax(axis=1)
        hit = (t_near <= t_far) & (t_near > EPS_DEPTH)
        t = np.where(hit, t_near, np.inf)
        p = o + np.where(hit, t, 0.0)[:, None] * d - self.lo
        others = _OTHER_AXES[axis]
        st = np.take_along_axis(p, others, axis=1)
        side = np.take_along_axis(d, axis[:, None], axis=1)[:, 0] > 0
        return t, st, 2 * axis + side

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p = rng.uniform(self.lo, self.hi, size=(n, 3))
        axis = rng.integers(0, 3, size=n)
        side = rng.integers(0, 2, size=n).astype(bool)
        rows = np.arange(n)
        p[rows, axis] = np.where(side, self.hi[axis], self.lo[axis])
        return p


def _build_primitives(spec: SynthSceneSpec) -> list:
    rng = np.random.default_rng(spec.seed)
    prims = [_Plane(p, _Texture(p.texture, rng)) for p in spec.planes]
    prims += [_Box(b, _Texture(b.texture, rng)) for b in spec.boxes]
    return prims


def _trace(prims: list, origins: np.ndarray, dirs: np.ndarray, background: np.ndarray):
    """Nearest hit per ray: (t, colors, primitive index or -1)."""
    n = len(dirs)
    best_t = np.full(n, np.inf)
    best_prim = np.full(n, -1, dtype=np.int64)
    best_st = np.zeros((n, 2))
    best_face = np.zeros(n, dtype=np.int64)
    for k, prim in enumerate(prims):
        t, st, face = prim.intersect(origins, dirs)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_prim[closer] = k
        best_st[closer] = st[closer]
        best_face[closer] = face[closer]
    colors = np.tile(background, (n, 1))
    for k, prim in enumerate(prims):
        sel = best_prim == k
        if np.any(sel):
            colors[sel] = prim.texture(best_st[sel], best_face[sel])
    return best_t, colors, best_prim


def ring_cameras(spec: SynthSceneSpec) -> List[Camera]:
    """Cameras of the ring in view order."""
    ring = spec.cameras
    width, height = spec.image_size
    focal = spec.focal if spec.focal is not None else float(width)
    target = np.asarray(ring.target, dtype=np.float64)
    if ring.count == 1:
        angles = np.zeros(1)
    else:
        half = np.deg2rad(ring.arc_degrees) / 2.0
        angles = np.linspace(-half, half, ring.count)
    cams = []
    for theta in angles:
        center = target + np.array([ring.radius * np.sin(theta), -ring.height, -ring.radius * np.cos(theta)])
        rotation, translation = look_at(center, target)
        cams.append(Camera(fx=focal, fy=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                           width=width, height=height, rotation=rotation, translation=translation))
    return cams


def _render_view(prims: list, cam: Camera, background: np.ndarray):
    H, W = cam.shape
    u, v = np.meshgrid(np.arange(W, dtype=np.float64), np.arange(H, dtype=np.float64))
    d_cam = np.stack([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, np.ones_like(u)], axis=-1).reshape(-1, 3)
    dirs = d_cam @ cam.rotation
    origins = np.broadcast_to(cam.center, dirs.shape)
    # camera-space z of the hit equals t since d_cam has unit z
    t, colors, prim = _trace(prims, origins, dirs, background)
    depth = np.where(np.isfinite(t), t, 0.0).reshape(H, W)
    return colors.reshape(H, W, 3), depth, prim.reshape(H, W)


def _sparse_points(prims: list, cams: List[Camera], spec: SynthSceneSpec,
                   background: np.ndarray) -> List[SparsePoint]:
    rng = np.random.default_rng(spec.seed + 1)
    if spec.num_points == 0 or not prims:
        return []
    n_candidates = CANDIDATES_PER_POINT * spec.num_points
    owner = rng.integers(0, len(prims), size=n_candidates)
    candidates = np.zeros((n_candidates, 3))
    for k, prim in enumerate(prims):
        sel = owner == k
        candidates[sel] = prim.sample(int(sel.sum()), rng)

    observations: List[List[Observation]] = [[] for _ in range(n_candidates)]
    colors = np.zeros((n_candidates, 3))
    for idx, cam in enumerate(cams):
        pc = cam.world_to_camera(candidates)
        z = pc[:, 2]
        front = z > EPS_DEPTH
        safe_z = np.where(front, z, 1.0)
        u = cam.fx * pc[:, 0] / safe_z + cam.cx
        v = cam.fy * pc[:, 1] / safe_z + cam.cy
        inside = front & (u >= 0) & (u <= cam.width - 1) & (v >= 0) & (v <= cam.height - 1)
        dirs = (pc / safe_z[:, None]) @ cam.rotation
        t, hit_colors, _ = _trace(prims, np.broadcast_to(cam.center, dirs.shape), dirs, background)
        visible = inside & (t >= z * (1.0 - VISIBILITY_RTOL))
        for i in np.flatnonzero(visible):
            if not observations[i]:
                colors[i] = hit_colors[i]
            observations[i].append(Observation(view_id=view_id(idx), pixel=(float(u[i]), float(v[i]))))

    points = []
    for i in range(n_candidates):
        if len(observations[i]) >= 2:
            points.append(SparsePoint(position=candidates[i], observations=observations[i],
                                      color=tuple(colors[i].tolist())))
            if len(points) == spec.num_points:
                break
    return points


def gen_synth_scene(spec: SynthSceneSpec) -> Dataset:
    """Render images and exact depth for every ring camera and sample sparse points.

    Raises:
        EmptySceneError: No primitive covers any pixel of any view.
    """
    prims = _build_primitives(spec)
    cams = ring_cameras(spec)
    background = np.asarray(spec.background, dtype=np.float64)

    views = []
    seen = np.zeros(len(prims), dtype=bool)
    for idx, cam in enumerate(cams):
        image, depth, prim = _render_view(prims, cam, background)
        seen[np.unique(prim[prim >= 0])] = True
        views.append(View(id=view_id(idx), image=image, camera=cam, gt_depth=depth))
    if not np.any(seen):
        raise EmptySceneError("No primitive is visible from any camera")
    for k in np.flatnonzero(~seen):
        logger.warning(f"Primitive {k} is not visible from any camera")

    points = _sparse_points(prims, cams, spec, background)
    test_ids = [view_id(i) for i in sorted(set(spec.test_views))]
    dataset = Dataset(views=views, points=points, test_ids=test_ids, name=spec.name)
    logger.info(f"Generated synthetic scene {spec.name}: {len(views)} views, {len(points)} sparse points")
    return dataset
