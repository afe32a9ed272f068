"""Grayscale/depth rasters, bilinear sampling, Laplace response and edge masks.

Rasters are plain 2-D ``numpy`` arrays indexed ``[row, col]``; pixel
coordinates are ``(u, v) = (col, row)``.  Depth values ``<= 0`` mark invalid
pixels.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmallError, OutOfBoundsError

LAPLACE_KERNELS = {
    "four": np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]),
    "eight": np.array([[1.0, 1.0, 1.0], [1.0, -8.0, 1.0], [1.0, 1.0, 1.0]]),
}
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def kernel_name(kernel) -> str:
    """Accept ``"four"``/``"eight"`` or the neighbourhood size ``4``/``8``."""
    aliases = {4: "four", 8: "eight", "4": "four", "8": "eight"}
    name = aliases.get(kernel, kernel)
    if name not in LAPLACE_KERNELS:
        raise ValueError(f"unknown Laplace kernel {kernel!r}")
    return name


def to_gray(rgb) -> np.ndarray:
    """Luma conversion of an ``(H, W, 3)`` colour raster."""
    rgb = np.asarray(rgb, dtype=float)
    return rgb[..., 0] * LUMA_WEIGHTS[0] + rgb[..., 1] * LUMA_WEIGHTS[1] + rgb[..., 2] * LUMA_WEIGHTS[2]


def in_bounds(shape, u, v):
    h, w = shape
    return (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)


def _cells(shape, u, v):
    h, w = shape
    x0 = np.clip(np.floor(u), 0, max(w - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(v), 0, max(h - 2, 0)).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    return x0, y0, x1, y1, u - x0, v - y0


def bilinear(img, u, v, with_gradient=False):
    """Vectorised bilinear interpolation at in-bounds coordinates.

    Callers are responsible for masking out-of-bounds coordinates first.  With
    ``with_gradient`` the analytic derivatives ``(dI/du, dI/dv)`` of the
    bilinear surface are returned as well; on a gridline the cell to the
    right/below is used (the last row/column uses the cell before it).
    """
    img = np.asarray(img, dtype=float)
    x0, y0, x1, y1, fx, fy = _cells(img.shape, np.asarray(u, float), np.asarray(v, float))
    a = img[y0, x0]
    b = img[y0, x1]
    c = img[y1, x0]
    d = img[y1, x1]
    top = a + fx * (b - a)
    bot = c + fx * (d - c)
    val = top + fy * (bot - top)
    if not with_gradient:
        return val
    gu = (b - a) + fy * ((d - c) - (b - a))
    gv = bot - top
    return val, gu, gv


def sample_bilinear(img, p) -> float:
    img = np.asarray(img, dtype=float)
    u, v = float(p[0]), float(p[1])
    if not in_bounds(img.shape, u, v):
        raise OutOfBoundsError(f"pixel ({u}, {v}) outside image of shape {img.shape}")
    return float(bilinear(img, u, v))


def sample_gradient(img, p) -> tuple[float, float]:
    img = np.asarray(img, dtype=float)
    u, v = float(p[0]), float(p[1])
    if not in_bounds(img.shape, u, v):
        raise OutOfBoundsError(f"pixel ({u}, {v}) outside image of shape {img.shape}")
    _, gu, gv = bilinear(img, u, v, with_gradient=True)
    return float(gu), float(gv)


def laplace(img, kernel="four") -> np.ndarray:
    """3x3 Laplace response; the one-pixel border is left at zero."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    if h < 3 or w < 3:
        raise ImageTooSmallError(f"Laplace needs at least 3x3 pixels, got {w}x{h}")
    k = LAPLACE_KERNELS[kernel_name(kernel)]
    out = np.zeros_like(img)
    inner = out[1:-1, 1:-1]
    for dy in range(3):
        for dx in range(3):
            if k[dy, dx] != 0:
                inner += k[dy, dx] * img[dy : h - 2 + dy, dx : w - 2 + dx]
    return out


def edge_mask(response, percentile: float = 90.0) -> np.ndarray:
    """Pixels whose ``|response|`` strictly exceeds the given percentile of all
    ``|response|`` values (linear-interpolated percentile)."""
    mag = np.abs(np.asarray(response, dtype=float))
    if mag.size == 0:
        raise ValueError("empty response raster")
    threshold = np.percentile(mag, percentile)
    return mag > threshold


def resize_image(img, height: int, width: int) -> np.ndarray:
    """Bilinear resample to ``(height, width)`` on pixel centres."""
    img = np.asarray(img, dtype=float)
    if img.shape == (height, width):
        return img.copy()
    return _resample(img, height, width, order=1)


def resize_depth(depth, height: int, width: int) -> np.ndarray:
    """Nearest-neighbour resample; never blends depths across discontinuities."""
    depth = np.asarray(depth, dtype=float)
    if depth.shape == (height, width):
        return depth.copy()
    return _resample(depth, height, width, order=0)


def _resample(a, height, width, order):
    h, w = a.shape
    rows = (np.arange(height) + 0.5) * (h / height) - 0.5
    cols = (np.arange(width) + 0.5) * (w / width) - 0.5
    rr, cc = np.meshgrid(np.clip(rows, 0, h - 1), np.clip(cols, 0, w - 1), indexing="ij")
    return ndimage.map_coordinates(a, [rr, cc], order=order, mode="nearest")
