"""File formats: PFM and 16-bit PNG disparities, 8-bit images, camera intrinsics."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .fusion import DisparityMap
from .image_core import GrayImage, to_gray

PNG_SCALE = 256.0


def write_pfm(path, array: np.ndarray):
    """Single-channel little-endian PFM (scale -1), rows stored bottom-up."""
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("write_pfm expects a 2-D array")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into a top-down float32 array (first channel if colour)."""
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind not in (b"Pf", b"PF"):
            raise ValueError(f"{path}: not a PFM file")
        channels = 3 if kind == b"PF" else 1
        dims = fh.readline()
        while dims.startswith(b"#"):
            dims = fh.readline()
        m = re.match(rb"^\s*(\d+)\s+(\d+)\s*$", dims)
        if not m:
            raise ValueError(f"{path}: malformed PFM dimensions")
        w, h = int(m.group(1)), int(m.group(2))
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size < w * h * channels:
        raise ValueError(f"{path}: truncated PFM payload")
    data = data[: w * h * channels].reshape(h, w, channels)[..., 0]
    return np.ascontiguousarray(data[::-1]).astype(np.float32)


def write_png16(path, disparity: np.ndarray, valid: np.ndarray | None = None):
    """16-bit PNG with 1/256 px steps; 0 encodes invalid (negative values too)."""
    d = np.asarray(disparity, dtype=np.float64)
    ok = np.isfinite(d) & (d > 0)
    if valid is not None:
        ok &= valid
    q = np.where(ok, np.clip(np.round(d * PNG_SCALE), 1, 65535), 0).astype(np.uint16)
    Image.fromarray(q).save(path)


def read_png16(path) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(Image.open(path)).astype(np.float64)
    valid = q > 0
    return np.where(valid, q / PNG_SCALE, 0.0).astype(np.float32), valid


def confidence_path(path) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}_conf{p.suffix or '.pfm'}")


def save_disparity_map(dmap: DisparityMap, path) -> tuple[Path, Path]:
    """Write the disparity (inf where invalid) and its confidence next to it.

    ``.png`` paths get the 16-bit encoding for the disparity; the confidence
    is always PFM.
    """
    path = Path(path)
    conf = confidence_path(path).with_suffix(".pfm")
    if path.suffix.lower() == ".png":
        write_png16(path, dmap.disparity, dmap.valid)
    else:
        write_pfm(path, np.where(dmap.valid, dmap.disparity, np.inf))
    write_pfm(conf, dmap.confidence)
    return path, conf


def load_disparity_map(path) -> DisparityMap:
    path = Path(path)
    if path.suffix.lower() == ".png":
        disp, valid = read_png16(path)
    else:
        raw = read_pfm(path)
        valid = np.isfinite(raw)
        disp = np.where(valid, raw, 0.0)
    conf = confidence_path(path).with_suffix(".pfm")
    confidence = read_pfm(conf) if conf.exists() else valid.astype(np.float32)
    return DisparityMap(disp, confidence, valid)


def read_image(path) -> GrayImage:
    """Load an 8-bit grayscale or RGB image; all-zero pixels become invalid."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return to_gray(np.asarray(im))


def write_image(path, img: GrayImage):
    data = np.clip(np.round(img.data), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path)


def read_disparity_raster(path) -> np.ndarray:
    """Ground-truth loader: PFM, 16-bit PNG (0 -> NaN) or ``.npy``; invalid pixels are NaN."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        return read_pfm(path).astype(np.float64)
    if suffix == ".npy":
        return np.load(path).astype(np.float64)
    disp, valid = read_png16(path)
    return np.where(valid, disp, np.nan).astype(np.float64)


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float

    def depth_to_disparity(self, depth):
        depth = np.asarray(depth, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(depth > 0, self.fx * self.baseline / depth, np.nan)

    def disparity_to_depth(self, disparity):
        return self.depth_to_disparity(disparity)


def read_camera(path) -> Camera:
    fields = Path(path).read_text().split()
    if len(fields) != 5:
        raise ValueError(f"{path}: expected 'fx fy cx cy baseline'")
    return Camera(*(float(v) for v in fields))
