"""COLMAP text model reader and writer (cameras.txt, images.txt, points3D.txt).

COLMAP places the centre of the top-left pixel at (0.5, 0.5); the engine
places it at (0, 0). Principal points and keypoints are shifted by half a
pixel on the way in and out.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Tuple, Union

import numpy as np

from core.errors import InvalidParameterError, ParseError, UnsupportedModelError
from core.io.dataset import Dataset, View
from core.io.images import read_png
from core.scene.camera import Camera
from core.scene.gaussians import normalize_quaternions, quaternion_to_rotation, rotation_to_quaternion
from core.scene.geometry import Observation, SparsePoint

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PIXEL_CENTER_OFFSET = 0.5
SUPPORTED_MODELS = {"PINHOLE": 4, "SIMPLE_PINHOLE": 3}


@dataclass
class _Intrinsics:
    model: str
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float


@dataclass
class _ImageRecord:
    image_id: int
    qvec: np.ndarray
    tvec: np.ndarray
    camera_id: int
    name: str
    xys: np.ndarray
    point3d_ids: np.ndarray


def _data_lines(path: Path) -> Iterator[Tuple[int, str]]:
    """(line number, text) of every non-comment line, blank lines included."""
    with open(path, "r", encoding="utf-8") as fid:
        for number, line in enumerate(fid, start=1):
            text = line.strip()
            if text.startswith("#"):
                continue
            yield number, text


def _numbers(elems: List[str], cast, path: Path, line: int, what: str):
    try:
        return [cast(e) for e in elems]
    except ValueError as e:
        raise ParseError(f"Bad {what}: {e}", line_number=line, path=str(path)) from e


def read_cameras_text(path: Path) -> Dict[int, _Intrinsics]:
    cameras = {}
    for line, text in _data_lines(path):
        if not text:
            continue
        elems = text.split()
        if len(elems) < 4:
            raise ParseError("Camera line needs CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]",
                             line_number=line, path=str(path))
        model = elems[1]
        if model not in SUPPORTED_MODELS:
            raise UnsupportedModelError(model)
        camera_id, width, height = _numbers([elems[0], elems[2], elems[3]], int, path, line, "camera header")
        params = _numbers(elems[4:], float, path, line, "camera parameters")
        if len(params) != SUPPORTED_MODELS[model]:
            raise ParseError(f"{model} expects {SUPPORTED_MODELS[model]} parameters, got {len(params)}",
                             line_number=line, path=str(path))
        if model == "PINHOLE":
            fx, fy, cx, cy = params
        else:
            fx, cx, cy = params
            fy = fx
        cameras[camera_id] = _Intrinsics(model, width, height, fx, fy, cx, cy)
    return cameras


def read_images_text(path: Path) -> List[Tuple[int, _ImageRecord]]:
    """Image records with the line number of their header line, in file order."""
    records = []
    lines = list(_data_lines(path))
    i = 0
    while i < len(lines):
        line, text = lines[i]
        i += 1
        if not text:
            continue
        elems = text.split()
        if len(elems) < 10:
            raise ParseError("Image line needs IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME",
                             line_number=line, path=str(path))
        image_id = _numbers(elems[:1], int, path, line, "image id")[0]
        pose = _numbers(elems[1:8], float, path, line, "image pose")
        camera_id = _numbers(elems[8:9], int, path, line, "camera id")[0]
        name = " ".join(elems[9:])

        points_text = ""
        points_line = line + 1
        if i < len(lines):
            points_line, points_text = lines[i]
            i += 1
        pts = points_text.split()
        if len(pts) % 3 != 0:
            raise ParseError("POINTS2D line must hold (X, Y, POINT3D_ID) triples",
                             line_number=points_line, path=str(path))
        xs = _numbers(pts[0::3], float, path, points_line, "keypoint x")
        ys = _numbers(pts[1::3], float, path, points_line, "keypoint y")
        ids = _numbers(pts[2::3], int, path, points_line, "point3D id")
        records.append((line, _ImageRecord(
            image_id=image_id,
            qvec=np.array(pose[:4]),
            tvec=np.array(pose[4:]),
            camera_id=camera_id,
            name=name,
            xys=np.column_stack([xs, ys]) if xs else np.zeros((0, 2)),
            point3d_ids=np.array(ids, dtype=np.int64),
        )))
    return records


def read_points3d_text(path: Path) -> List[Tuple[int, np.ndarray, np.ndarray, List[Tuple[int, int]]]]:
    """(line number, xyz, rgb, track) per point, in file order."""
    points = []
    for line, text in _data_lines(path):
        if not text:
            continue
        elems = text.split()
        if len(elems) < 8 or (len(elems) - 8) % 2 != 0:
            raise ParseError("Point line needs POINT3D_ID X Y Z R G B ERROR TRACK[] pairs",
                             line_number=line, path=str(path))
        xyz = np.array(_numbers(elems[1:4], float, path, line, "point position"))
        rgb = np.array(_numbers(elems[4:7], int, path, line, "point color"), dtype=np.float64) / 255.0
        track_vals = _numbers(elems[8:], int, path, line, "track")
        track = list(zip(track_vals[0::2], track_vals[1::2]))
        points.append((line, xyz, rgb, track))
    return points


def load_colmap_text(directory: PathLike) -> Dataset:
    """Read a COLMAP text model into a Dataset.

    Images are read from ``<dir>/images/<name>`` when the file exists. View
    ids are the image file names without extension, in images.txt order.

    Raises:
        UnsupportedModelError: A camera uses a model other than PINHOLE or SIMPLE_PINHOLE.
        ParseError: A malformed line, with its line number.
    """
    directory = Path(directory)
    paths = {name: directory / f"{name}.txt" for name in ("cameras", "images", "points3D")}
    for name, path in paths.items():
        if not path.exists():
            raise ParseError(f"Missing COLMAP file {name}.txt", path=str(path))

    intrinsics = read_cameras_text(paths["cameras"])
    records = read_images_text(paths["images"])

    views: List[View] = []
    id_of_image: Dict[int, str] = {}
    keypoints: Dict[int, np.ndarray] = {}
    for line, rec in records:
        if rec.camera_id not in intrinsics:
            raise ParseError(f"Image {rec.image_id} references unknown camera {rec.camera_id}",
                             line_number=line, path=str(paths["images"]))
        view_id = Path(rec.name).stem
        if view_id in id_of_image.values():
            raise ParseError(f"Duplicate view id {view_id!r}", line_number=line, path=str(paths["images"]))
        intr = intrinsics[rec.camera_id]
        try:
            rotation = quaternion_to_rotation(normalize_quaternions(rec.qvec))
            camera = Camera(
                fx=intr.fx, fy=intr.fy,
                cx=intr.cx - PIXEL_CENTER_OFFSET, cy=intr.cy - PIXEL_CENTER_OFFSET,
                width=intr.width, height=intr.height,
                rotation=rotation, translation=rec.tvec,
            )
        except InvalidParameterError as e:
            raise ParseError(str(e), line_number=line, path=str(paths["images"])) from e

        image_path = directory / "images" / rec.name
        if image_path.exists():
            image = read_png(image_path)
        else:
            logger.warning(f"Image file {image_path} not found; view {view_id} gets a black image")
            image = np.zeros((intr.height, intr.width, 3))
        views.append(View(id=view_id, image=image, camera=camera))
        id_of_image[rec.image_id] = view_id
        keypoints[rec.image_id] = rec.xys

    points: List[SparsePoint] = []
    for line, xyz, rgb, track in read_points3d_text(paths["points3D"]):
        observations = []
        for image_id, idx in track:
            if image_id not in id_of_image:
                raise ParseError(f"Track references unknown image {image_id}",
                                 line_number=line, path=str(paths["points3D"]))
            xys = keypoints[image_id]
            if not 0 <= idx < len(xys):
                raise ParseError(f"Track references keypoint {idx} of image {image_id} "
                                 f"which has {len(xys)}", line_number=line, path=str(paths["points3D"]))
            u, v = xys[idx] - PIXEL_CENTER_OFFSET
            observations.append(Observation(view_id=id_of_image[image_id], pixel=(float(u), float(v))))
        points.append(SparsePoint(position=xyz, observations=observations, color=tuple(rgb)))

    logger.info(f"Loaded COLMAP model from {directory}: {len(views)} views, {len(points)} points")
    return Dataset(views=views, points=points, name=directory.name)


def write_colmap_text(dataset: Dataset, directory: PathLike) -> None:
    """Write cameras, images and points of a dataset as a COLMAP text model."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    image_ids = {v.id: i + 1 for i, v in enumerate(dataset.views)}

    # Keypoints per view, in point order
    keypoints: Dict[str, List[Tuple[float, float, int]]] = {v.id: [] for v in dataset.views}
    tracks = []
    for p_idx, point in enumerate(dataset.points):
        track = []
        for obs in point.observations:
            kp = keypoints[obs.view_id]
            track.append((image_ids[obs.view_id], len(kp)))
            kp.append((float(obs.pixel[0]) + PIXEL_CENTER_OFFSET, float(obs.pixel[1]) + PIXEL_CENTER_OFFSET, p_idx + 1))
        tracks.append(track)

    with open(directory / "cameras.txt", "w", encoding="utf-8") as fid:
        fid.write("# Camera list with one line of data per camera:\n")
        fid.write("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n")
        for v in dataset.views:
            c = v.camera
            params = [float(c.fx), float(c.fy), float(c.cx) + PIXEL_CENTER_OFFSET, float(c.cy) + PIXEL_CENTER_OFFSET]
            fid.write(" ".join(map(str, [image_ids[v.id], "PINHOLE", c.width, c.height, *map(repr, params)])) + "\n")

    with open(directory / "images.txt", "w", encoding="utf-8") as fid:
        fid.write("# Image list with two lines of data per image:\n")
        fid.write("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n")
        fid.write("#   POINTS2D[] as (X, Y, POINT3D_ID)\n")
        for v in dataset.views:
            qvec = rotation_to_quaternion(v.camera.rotation)
            header = [image_ids[v.id], *map(repr, qvec.tolist()), *map(repr, v.camera.translation.tolist()),
                      image_ids[v.id], f"{v.id}.png"]
            fid.write(" ".join(map(str, header)) + "\n")
            fid.write(" ".join(f"{x!r} {y!r} {pid}" for x, y, pid in keypoints[v.id]) + "\n")

    with open(directory / "points3D.txt", "w", encoding="utf-8") as fid:
        fid.write("# 3D point list with one line of data per point:\n")
        fid.write("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n")
        for p_idx, (point, track) in enumerate(zip(dataset.points, tracks)):
            rgb = np.rint(np.clip(point.color, 0.0, 1.0) * 255).astype(int).tolist()
            elems = [p_idx + 1, *map(repr, point.position.tolist()), *rgb, 0.0]
            for image_id, kp_idx in track:
                elems += [image_id, kp_idx]
            fid.write(" ".join(map(str, elems)) + "\n")
