"""Grayscale rasters with validity masks, box-filter pyramids and x-gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit


class DimensionError(ValueError):
    """Raised for empty or mismatched rasters."""


class ConfigurationError(ValueError):
    """Raised when solver parameters cannot be honoured for a given input."""


@dataclass(frozen=True)
class GrayImage:
    """Single-channel intensity raster in [0, 255] with a per-pixel validity mask.

    Invalid pixels always carry intensity 0. Arrays are made read-only on
    construction so instances can be shared between workers.
    """

    data: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        valid = np.ascontiguousarray(self.valid, dtype=bool)
        if data.ndim != 2 or data.size == 0:
            raise DimensionError(f"expected a non-empty 2-D raster, got shape {data.shape}")
        if valid.shape != data.shape:
            raise DimensionError(f"mask shape {valid.shape} != data shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("intensities must be finite")
        if np.any(data[~valid] != 0):
            data = np.where(valid, data, 0.0)
        data.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def from_array(cls, data, valid=None) -> "GrayImage":
        data = np.asarray(data, dtype=np.float64)
        if valid is None:
            valid = np.ones(data.shape, dtype=bool)
        return cls(np.where(valid, data, 0.0), valid)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class ImagePyramid:
    levels: list[GrayImage]
    scale_factor: int = field(default=2, init=False)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i) -> GrayImage:
        return self.levels[i]


def to_gray(raster) -> GrayImage:
    """Convert an 8-bit RGB (H, W, 3) or grayscale (H, W) raster to a GrayImage.

    Uses Rec. 601 luma weights. Pixels that are zero in every channel are
    treated as rectification black-fill and marked invalid.
    """
    arr = np.asarray(raster)
    if arr.ndim not in (2, 3) or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"cannot convert raster of shape {arr.shape}")
    arr = arr.astype(np.float64)
    if arr.ndim == 2:
        gray = arr
        valid = arr != 0
    else:
        if arr.shape[2] == 4:
            arr = arr[..., :3]
        if arr.shape[2] != 3:
            raise DimensionError(f"expected 3 channels, got {arr.shape[2]}")
        gray = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
        valid = np.any(arr != 0, axis=2)
    return GrayImage.from_array(gray, valid)


def downsample(img: GrayImage) -> GrayImage:
    h, w = img.height // 2, img.width // 2
    if h < 1 or w < 1:
        raise ConfigurationError(f"cannot halve a {img.width}x{img.height} image")
    d = img.data[: 2 * h, : 2 * w].reshape(h, 2, w, 2)
    v = img.valid[: 2 * h, : 2 * w].reshape(h, 2, w, 2)
    mean = d.mean(axis=(1, 3))
    valid = v.all(axis=(1, 3))
    return GrayImage.from_array(mean, valid)


def build_pyramid(img: GrayImage, num_levels: int, min_size: int = 1) -> ImagePyramid:
    """Build a factor-2 pyramid; level 0 is ``img`` itself.

    Raises ConfigurationError if the coarsest level would be smaller than
    ``min_size`` (normally the patch size) in either dimension.
    """
    if num_levels < 1:
        raise ConfigurationError("num_levels must be >= 1")
    coarse_w = img.width >> (num_levels - 1)
    coarse_h = img.height >> (num_levels - 1)
    if min(coarse_w, coarse_h) < max(min_size, 1):
        raise ConfigurationError(
            f"{num_levels} levels reduce {img.width}x{img.height} to "
            f"{coarse_w}x{coarse_h}, smaller than {min_size}"
        )
    levels = [img]
    for _ in range(1, num_levels):
        levels.append(downsample(levels[-1]))
    return ImagePyramid(levels)


@njit(cache=True)
def _gradient_x(data, valid):
    h, w = data.shape
    g = np.zeros((h, w))
    gv = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            if x == 0:
                ok = valid[y, 0] and valid[y, 1]
                val = data[y, 1] - data[y, 0]
            elif x == w - 1:
                ok = valid[y, w - 1] and valid[y, w - 2]
                val = data[y, w - 1] - data[y, w - 2]
            else:
                ok = valid[y, x - 1] and valid[y, x] and valid[y, x + 1]
                val = 0.5 * (data[y, x + 1] - data[y, x - 1])
            if ok:
                g[y, x] = val
                gv[y, x] = True
    return g, gv


def gradient_x(img: GrayImage) -> GrayImage:
    """Horizontal derivative: central differences inside, one-sided at the borders.

    A gradient pixel is valid only if every pixel of its stencil is valid.
    The result may be negative; it is not an intensity image.
    """
    if img.width < 3:
        raise DimensionError("gradient_x needs width >= 3")
    g, gv = _gradient_x(img.data, img.valid)
    return GrayImage(g, gv)


@njit(cache=True)
def sample_row(data, valid, y, x):
    """Linear interpolation of row ``y`` at column ``x``.

    Returns (value, ok). ``ok`` is False when ``x`` is outside [0, w-1] or a
    neighbour with non-zero weight is invalid. Rows are integral, so the
    bilinear kernel reduces to a 1-D lerp.
    """
    w = data.shape[1]
    if x < 0.0 or x > w - 1:
        return 0.0, False
    x0 = int(np.floor(x))
    fx = x - x0
    if fx == 0.0:
        return data[y, x0], valid[y, x0]
    if x0 + 1 >= w:
        return 0.0, False
    if not (valid[y, x0] and valid[y, x0 + 1]):
        return 0.0, False
    return (1.0 - fx) * data[y, x0] + fx * data[y, x0 + 1], True
