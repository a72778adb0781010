"""8-bit PNG color images."""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from core.errors import ParseError, ShapeError


def write_png(path: Union[str, Path], image: np.ndarray) -> None:
    """Write an (H,W,3) float image in [0,1] as 8-bit RGB."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"PNG images must be (H,W,3), got {image.shape}")
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(pixels).save(Path(path))


def read_png(path: Union[str, Path]) -> np.ndarray:
    """Read an image file as (H,W,3) float64 in [0,1]."""
    try:
        with Image.open(Path(path)) as img:
            pixels = np.asarray(img.convert("RGB"), dtype=np.float64)
    except OSError as e:
        raise ParseError(f"Cannot decode image: {e}", path=str(path)) from e
    return pixels / 255.0
