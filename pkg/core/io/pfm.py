"""PFM reader and writer for depth and disparity maps."""

import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from core.errors import ChannelCountError, ParseError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_pfm(path: PathLike, data: np.ndarray, valid: Optional[np.ndarray] = None,
              little_endian: bool = True) -> None:
    """Write a single-channel float32 map; pixels outside ``valid`` are stored as 0."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ChannelCountError(f"PFM depth maps must be 2D, got shape {data.shape}")
    if valid is not None:
        data = np.where(valid, data, np.float32(0.0)).astype(np.float32)
    H, W = data.shape
    scale = -1.0 if little_endian else 1.0
    dtype = np.dtype("<f4" if little_endian else ">f4")
    header = f"Pf\n{W} {H}\n{scale}\n".encode("ascii")
    payload = np.flipud(data).astype(dtype).tobytes()
    Path(path).write_bytes(header + payload)


def _read_header_line(buf: bytes, pos: int, path: PathLike, line: int) -> Tuple[str, int]:
    end = buf.find(b"\n", pos)
    if end < 0:
        raise ParseError("Truncated PFM header", line_number=line, path=str(path))
    try:
        return buf[pos:end].decode("ascii").strip(), end + 1
    except UnicodeDecodeError as e:
        raise ParseError("Non-ASCII PFM header", line_number=line, path=str(path)) from e


def read_pfm(path: PathLike, channels: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Read a PFM map.

    Args:
        path: File path
        channels: Expected channel count (1 for depth or disparity)

    Returns:
        Tuple of (float32 map top row first, validity mask of non-zero finite pixels)

    Raises:
        ParseError: Malformed header or short payload.
        ChannelCountError: The file's channel count differs from ``channels``.
    """
    buf = Path(path).read_bytes()
    magic, pos = _read_header_line(buf, 0, path, 1)
    if magic == "Pf":
        found = 1
    elif magic == "PF":
        found = 3
    else:
        raise ParseError(f"Bad PFM magic {magic!r}", line_number=1, path=str(path))
    if found != channels:
        raise ChannelCountError(f"{path}: PFM has {found} channel(s), expected {channels}")

    dims, pos = _read_header_line(buf, pos, path, 2)
    try:
        W, H = (int(v) for v in dims.split())
    except ValueError as e:
        raise ParseError(f"Bad PFM dimensions {dims!r}", line_number=2, path=str(path)) from e
    if W <= 0 or H <= 0:
        raise ParseError(f"Non-positive PFM dimensions {W}x{H}", line_number=2, path=str(path))

    scale_text, pos = _read_header_line(buf, pos, path, 3)
    try:
        scale = float(scale_text)
    except ValueError as e:
        raise ParseError(f"Bad PFM scale {scale_text!r}", line_number=3, path=str(path)) from e
    if scale == 0:
        raise ParseError("PFM scale must be non-zero", line_number=3, path=str(path))
    dtype = np.dtype("<f4" if scale < 0 else ">f4")

    count = W * H * found
    if len(buf) - pos < count * 4:
        raise ParseError(f"PFM payload holds {(len(buf) - pos) // 4} values, expected {count}",
                         path=str(path))
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=pos)
    shape = (H, W) if found == 1 else (H, W, 3)
    data = np.flipud(data.reshape(shape)).astype(np.float32)
    valid = np.isfinite(data) & (data != 0)
    if found == 3:
        valid = np.all(valid, axis=-1)
    return np.ascontiguousarray(data), valid
