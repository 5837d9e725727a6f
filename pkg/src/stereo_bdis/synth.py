"""Procedural rectified stereo pairs with known disparity.

Three scene kinds are supported: ``shift`` (uniform translation, produced by
cropping one wide texture twice), ``plane`` (disparity linear in x) and
``sinusoid`` (disparity varying sinusoidally). The right image of the warped
kinds is rendered by sampling the texture along each row with linear
interpolation, so the ground truth is exact in left-image coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .image_core import GrayImage

KINDS = ("shift", "plane", "sinusoid")


class SynthParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SynthParams:
    width: int = 640
    height: int = 480
    seed: int = 0
    shift: int = 5
    d_left: float = 2.0
    d_right: float = 10.0
    d0: float = 6.0
    amplitude: float = 2.0
    period: float = 160.0
    # fraction of the width turned into one constant-intensity vertical band
    band_fraction: float = 0.0
    band_start: float = 0.375
    # peak of the multiplicative right-image gain used for specular scenes
    specular_peak: float = 1.6
    specular_radius: float = 0.35
    noise_sigma: float = 0.0
    quantize: bool = True


def texture(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """Band-limited multi-scale noise in roughly [20, 220]."""
    field = np.zeros((height, width))
    for sigma, amp in ((1.0, 0.6), (2.0, 1.0), (4.0, 1.4), (8.0, 1.8), (16.0, 1.6)):
        layer = gaussian_filter(rng.standard_normal((height, width)), sigma, mode="wrap")
        field += amp * layer / layer.std()
    lo, hi = np.percentile(field, [0.5, 99.5])
    return np.clip(20.0 + 200.0 * (field - lo) / (hi - lo), 20.0, 220.0)


def disparity_field(kind: str, p: SynthParams):
    """Callable d(x, y) for the warped kinds, with x continuous and y integral."""
    if kind == "plane":
        slope = (p.d_right - p.d_left) / max(p.width - 1, 1)
        return lambda x, y: p.d_left + slope * x
    if kind == "sinusoid":
        return lambda x, y: p.d0 + p.amplitude * np.sin(2.0 * np.pi * (x / p.period + y / (1.5 * p.period)))
    raise SynthParameterError(f"unknown kind {kind!r}")


def specular_gain(height: int, width: int, p: SynthParams) -> np.ndarray:
    """Smooth radial gain, ``specular_peak`` at the centre decaying towards 1."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    r2 = (xx - (width - 1) / 2.0) ** 2 + (yy - (height - 1) / 2.0) ** 2
    rho = p.specular_radius * min(width, height)
    return 1.0 + (p.specular_peak - 1.0) * np.exp(-r2 / (2.0 * rho * rho))


def _lerp_rows(tex: np.ndarray, xs: np.ndarray) -> np.ndarray:
    w = tex.shape[1]
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 2)
    fx = xs - x0
    rows = np.arange(tex.shape[0])[:, None]
    return (1.0 - fx) * tex[rows, x0] + fx * tex[rows, x0 + 1]


def synth_generate(kind: str, params: SynthParams | None = None, specular: bool = False):
    """Return ``(left, right, gt)`` with ``gt`` the left-view disparity (float64)."""
    p = params or SynthParams()
    if kind not in KINDS:
        raise SynthParameterError(f"kind must be one of {KINDS}, got {kind!r}")
    if not 1.0 <= p.specular_peak <= 1.6:
        raise SynthParameterError("specular_peak must lie in [1.0, 1.6]")
    w, h = p.width, p.height
    limit = w / 4.0
    rng = np.random.default_rng(p.seed)
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h)[:, None]

    if kind == "shift":
        if not 0 <= p.shift <= limit:
            raise SynthParameterError(f"shift {p.shift} outside [0, {limit}]")
        k = int(p.shift)
        tex = _with_band(texture(h, w + k, rng), p, w)
        left = tex[:, :w]
        right = tex[:, k:k + w]
        gt = np.full((h, w), float(k))
    else:
        d = disparity_field(kind, p)
        gt = d(xs[None, :], ys) * np.ones((h, 1))
        if gt.max() > limit or gt.min() < 0:
            raise SynthParameterError(f"disparity range [{gt.min():.2f}, {gt.max():.2f}] exceeds [0, {limit}]")
        if kind == "sinusoid" and 2 * np.pi * p.amplitude / p.period >= 0.5:
            raise SynthParameterError("sinusoid too steep: need 2*pi*amplitude/period < 0.5")
        margin = int(np.ceil(gt.max())) + 2
        tex = _with_band(texture(h, w + margin, rng), p, w)
        left = tex[:, :w]
        # right pixel x' shows the left point x solving x - d(x) = x'
        src = np.repeat(xs[None, :], h, axis=0)
        for _ in range(60):
            src = xs[None, :] + d(src, ys)
        right = _lerp_rows(tex, src)

    if specular:
        right = right * specular_gain(h, w, p)
    if p.noise_sigma > 0:
        left = left + rng.normal(0.0, p.noise_sigma, left.shape)
        right = right + rng.normal(0.0, p.noise_sigma, right.shape)
    left = np.clip(left, 1.0, 255.0)
    right = np.clip(right, 1.0, 255.0)
    if p.quantize:
        left, right = np.round(left), np.round(right)
    return GrayImage.from_array(left), GrayImage.from_array(right), gt


def band_mask(p: SynthParams) -> np.ndarray:
    """Left-image pixels covered by the constant band (all rows)."""
    mask = np.zeros((p.height, p.width), dtype=bool)
    if p.band_fraction > 0:
        x0 = int(round(p.band_start * p.width))
        x1 = x0 + int(round(p.band_fraction * p.width))
        mask[:, x0:x1] = True
    return mask


def _with_band(tex, p: SynthParams, width: int):
    if p.band_fraction <= 0:
        return tex
    x0 = int(round(p.band_start * width))
    x1 = x0 + int(round(p.band_fraction * width))
    tex = tex.copy()
    tex[:, x0:x1] = round(float(tex.mean()))
    return tex
