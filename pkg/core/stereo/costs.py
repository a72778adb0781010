"""Per-pixel matching costs for rectified stereo."""

import numpy as np

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Number of set bits in every byte value
POPCOUNT_LUT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def to_gray(image: np.ndarray) -> np.ndarray:
    """Luma of an (H,W,3) image; (H,W) input is returned as float."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        return image @ GRAY_WEIGHTS
    return image


def census_transform(gray: np.ndarray, size: int = 7) -> np.ndarray:
    """Census code of each pixel over a size x size neighbourhood.

    Bit set where the neighbour is darker than the centre. Borders are
    edge-padded.
    """
    r = size // 2
    H, W = gray.shape
    padded = np.pad(gray, r, mode="edge")
    code = np.zeros((H, W), dtype=np.uint64)
    one = np.uint64(1)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            neighbour = padded[r + dy:r + dy + H, r + dx:r + dx + W]
            code = (code << one) | (neighbour < gray).astype(np.uint64)
    return code


def hamming(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Bitwise Hamming distance of two uint64 code arrays."""
    x = np.ascontiguousarray(np.bitwise_xor(a, b))
    return POPCOUNT_LUT[x.view(np.uint8).reshape(x.shape + (8,))].sum(axis=-1, dtype=np.int64)


def census_cost_volume(left: np.ndarray, right: np.ndarray, d_max: int, size: int = 7) -> np.ndarray:
    """(d_max+1, H, W) Hamming costs; columns without a right match get the maximum cost."""
    gl, gr = to_gray(left), to_gray(right)
    cl, cr = census_transform(gl, size), census_transform(gr, size)
    H, W = gl.shape
    worst = size * size - 1
    volume = np.full((d_max + 1, H, W), float(worst))
    for d in range(d_max + 1):
        volume[d, :, d:] = hamming(cl[:, d:], cr[:, :W - d])
    return volume


def sad_cost_volume(left: np.ndarray, right: np.ndarray, d_max: int) -> np.ndarray:
    """(d_max+1, H, W) absolute intensity differences averaged over channels."""
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.ndim == 2:
        left, right = left[..., None], right[..., None]
    H, W = left.shape[:2]
    volume = np.full((d_max + 1, H, W), 1.0)
    for d in range(d_max + 1):
        volume[d, :, d:] = np.mean(np.abs(left[:, d:] - right[:, :W - d]), axis=-1)
    return volume
