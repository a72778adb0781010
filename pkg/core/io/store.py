"""On-disk layout of a materialised dataset.

A dataset directory holds a COLMAP text model, ``images/<id>.png``,
``depth/<id>.pfm`` ground-truth maps and ``dataset.json`` with the split.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from core.errors import ParseError
from core.io.colmap import load_colmap_text, write_colmap_text
from core.io.dataset import Dataset, View
from core.io.images import write_png
from core.io.pfm import read_pfm, write_pfm

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DATASET_FILE = "dataset.json"
IMAGES_DIR = "images"
DEPTH_DIR = "depth"


def save_dataset(dataset: Dataset, directory: PathLike) -> Path:
    """Write every view, the sparse model, gt depth and the split."""
    directory = Path(directory)
    (directory / IMAGES_DIR).mkdir(parents=True, exist_ok=True)
    write_colmap_text(dataset, directory)
    depth_files = {}
    for v in dataset.views:
        write_png(directory / IMAGES_DIR / f"{v.id}.png", v.image)
        if v.gt_depth is not None:
            (directory / DEPTH_DIR).mkdir(exist_ok=True)
            rel = f"{DEPTH_DIR}/{v.id}.pfm"
            write_pfm(directory / rel, v.gt_depth, v.gt_depth > 0)
            depth_files[v.id] = rel
    meta = {
        "name": dataset.name,
        "train": list(dataset.train_ids),
        "test": list(dataset.test_ids),
        "gt_depth": depth_files,
        "prior_dir": str(dataset.prior_dir) if dataset.prior_dir else None,
    }
    (directory / DATASET_FILE).write_text(json.dumps(meta, indent=2), encoding="utf-8")
    logger.info(f"Saved dataset {dataset.name} with {len(dataset.views)} views to {directory}")
    return directory


def load_dataset(directory: PathLike, prior_dir: Optional[PathLike] = None) -> Dataset:
    """Load a dataset directory; a bare COLMAP text model is accepted too.

    Args:
        directory: Dataset directory
        prior_dir: Directory of external ``<view_id>.pfm`` priors, overriding dataset.json
    """
    directory = Path(directory)
    dataset = load_colmap_text(directory)
    meta_path = directory / DATASET_FILE
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, line_number=e.lineno, path=str(meta_path)) from e
        gt_depth = {}
        for view_id, rel in (meta.get("gt_depth") or {}).items():
            depth, valid = read_pfm(directory / rel)
            gt_depth[view_id] = np.where(valid, depth.astype(np.float64), 0.0)
        unknown = sorted(set(gt_depth) - {v.id for v in dataset.views})
        if unknown:
            raise ParseError(f"Depth maps for unknown views {unknown}", path=str(meta_path))
        dataset = Dataset(
            views=[View(id=v.id, image=v.image, camera=v.camera, gt_depth=gt_depth.get(v.id)) for v in dataset.views],
            points=dataset.points,
            train_ids=meta.get("train") or None,
            test_ids=meta.get("test") or [],
            prior_dir=Path(meta["prior_dir"]) if meta.get("prior_dir") else None,
            name=meta.get("name") or directory.name,
        )
    if prior_dir is not None:
        dataset.prior_dir = Path(prior_dir)
    logger.info(f"Loaded dataset {dataset.name}: {len(dataset.train_ids)} train / {len(dataset.test_ids)} test views")
    return dataset
