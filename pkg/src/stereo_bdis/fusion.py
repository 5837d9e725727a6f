"""Fusion of overlapping patch disparities into a dense map."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .bayesian import PatchPosterior, SpatialMask
from .image_core import GrayImage, sample_row
from .patch_solver import PatchEstimate, PatchStatus

# rows per accumulation band; each band is owned by one worker
BAND_ROWS = 16


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel disparity with validity and accumulated weight mass.

    Invalid pixels carry disparity 0. Arrays are float32 so that a map
    survives a PFM round trip bit for bit.
    """

    disparity: np.ndarray
    confidence: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "disparity", np.ascontiguousarray(self.disparity, dtype=np.float32))
        object.__setattr__(self, "confidence", np.ascontiguousarray(self.confidence, dtype=np.float32))
        object.__setattr__(self, "valid", np.ascontiguousarray(self.valid, dtype=bool))
        if not (self.disparity.shape == self.confidence.shape == self.valid.shape):
            raise ValueError("disparity, confidence and valid must share one shape")

    @property
    def width(self) -> int:
        return self.disparity.shape[1]

    @property
    def height(self) -> int:
        return self.disparity.shape[0]

    @property
    def density(self) -> float:
        return float(self.valid.mean())

    @classmethod
    def empty(cls, width: int, height: int) -> "DisparityMap":
        z = np.zeros((height, width), dtype=np.float32)
        return cls(z, z.copy(), np.zeros((height, width), dtype=bool))


@njit(parallel=True, cache=True)
def accumulate(ox, oy, disp, weights, height, width, band_rows):
    """Weighted average of patch disparities, in patch order within each pixel.

    Rows are split into bands processed in parallel; every band visits the
    patches in the same order, so the result does not depend on the number
    of workers.
    """
    n, sh, sw = weights.shape
    num = np.zeros((height, width))
    den = np.zeros((height, width))
    n_bands = (height + band_rows - 1) // band_rows
    for band in prange(n_bands):
        r0 = band * band_rows
        r1 = min(r0 + band_rows, height)
        for k in range(n):
            y0 = oy[k]
            if y0 >= r1 or y0 + sh <= r0:
                continue
            for j in range(max(r0 - y0, 0), min(r1 - y0, sh)):
                y = y0 + j
                for i in range(sw):
                    wgt = weights[k, j, i]
                    if wgt > 0.0:
                        x = ox[k] + i
                        num[y, x] += wgt * disp[k]
                        den[y, x] += wgt
    return num, den


@njit(parallel=True, cache=True)
def residual_weights(L, L_valid, R, R_valid, ox, oy, disp, size):
    """Inverse clamped squared brightness residual of each patch at each of its pixels."""
    n = ox.shape[0]
    out = np.zeros((n, size, size))
    for k in prange(n):
        for j in range(size):
            y = oy[k] + j
            for i in range(size):
                x = ox[k] + i
                if not L_valid[y, x]:
                    continue
                v, ok = sample_row(R, R_valid, y, x - disp[k])
                if ok:
                    e = v - L[y, x]
                    out[k, j, i] = 1.0 / max(e * e, 1.0)
    return out


def fuse_weighted(origins, disparities, weights, out_size, pixel_valid=None) -> DisparityMap:
    """Fuse patches given explicit per-pixel weights of shape (n, s, s).

    ``out_size`` is ``(width, height)``. Pixels where ``pixel_valid`` is
    False, or with no positive weight, come out invalid.
    """
    width, height = out_size
    origins = np.asarray(origins, dtype=np.int64).reshape(-1, 2)
    disparities = np.asarray(disparities, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if len(origins) == 0:
        return DisparityMap.empty(width, height)
    if weights.ndim != 3 or weights.shape[0] != len(origins) or len(disparities) != len(origins):
        raise ValueError("origins, disparities and weights are not aligned")
    num, den = accumulate(np.ascontiguousarray(origins[:, 0]), np.ascontiguousarray(origins[:, 1]),
                          disparities, weights, height, width, BAND_ROWS)
    valid = den > 0
    if pixel_valid is not None:
        valid &= pixel_valid
    disparity = np.zeros((height, width))
    np.divide(num, den, out=disparity, where=valid)
    return DisparityMap(disparity, np.where(valid, den, 0.0), valid)


def _converged(estimates):
    kept = [e for e in estimates if e.status == PatchStatus.CONVERGED]
    return sorted(kept, key=lambda e: e.patch_id)


def fuse_residual(estimates: list[PatchEstimate], left: GrayImage, right: GrayImage,
                  patch_size: int) -> DisparityMap:
    """Baseline fusion: each patch weighs each of its pixels by 1 / max(e^2, 1)."""
    kept = _converged(estimates)
    if not kept:
        return DisparityMap.empty(left.width, left.height)
    origins = np.array([e.origin for e in kept], dtype=np.int64)
    disp = np.array([e.disparity for e in kept])
    weights = residual_weights(left.data, left.valid, right.data, right.valid,
                               origins[:, 0].copy(), origins[:, 1].copy(), disp, patch_size)
    return fuse_weighted(origins, disp, weights, (left.width, left.height), left.valid)


def fuse_bayesian(posteriors: list[PatchPosterior], estimates: list[PatchEstimate],
                  mask: SpatialMask, out_size, pixel_valid=None) -> DisparityMap:
    """Fuse with weight posterior_k * mask(x - origin_k) for every covered pixel."""
    if len(posteriors) != len(estimates):
        raise ValueError(f"{len(posteriors)} posteriors for {len(estimates)} estimates")
    pairs = []
    for pp, est in zip(posteriors, estimates):
        if pp.patch_id != est.patch_id:
            raise ValueError(f"posterior {pp.patch_id} paired with estimate {est.patch_id}")
        if est.status == PatchStatus.CONVERGED:
            pairs.append((est.patch_id, est, pp))
    pairs.sort(key=lambda t: t[0])
    width, height = out_size
    if not pairs:
        return DisparityMap.empty(width, height)
    origins = np.array([e.origin for _, e, _ in pairs], dtype=np.int64)
    disp = np.array([e.disparity for _, e, _ in pairs])
    post = np.array([p.posterior for _, _, p in pairs])
    weights = post[:, None, None] * mask.weights[None, :, :]
    return fuse_weighted(origins, disp, weights, out_size, pixel_valid)


def upsample_disparity(coarse: DisparityMap, fine_size) -> DisparityMap:
    """Nearest-neighbour upsampling with disparities doubled.

    ``fine_size`` is ``(width, height)``; odd fine dimensions reuse the last
    coarse row/column. Invalid coarse pixels map to 0 with zero confidence.
    """
    width, height = fine_size
    ys = np.minimum(np.arange(height) // 2, coarse.height - 1)
    xs = np.minimum(np.arange(width) // 2, coarse.width - 1)
    valid = coarse.valid[np.ix_(ys, xs)]
    disp = np.where(valid, 2.0 * coarse.disparity[np.ix_(ys, xs)].astype(np.float64), 0.0)
    conf = np.where(valid, coarse.confidence[np.ix_(ys, xs)], 0.0)
    return DisparityMap(disp, conf, valid)
