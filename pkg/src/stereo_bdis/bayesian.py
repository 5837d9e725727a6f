"""Patch confidence: Boltzmann photometric likelihood, windowed posterior, spatial mask."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import MaskForm, SolverConfig
from .image_core import GrayImage
from .patch_solver import PatchEstimate, PatchStatus, PatchTemplate, patch_terms


@dataclass(frozen=True)
class PatchPosterior:
    patch_id: int
    center_disparity: float
    window_disparities: np.ndarray
    window_likelihoods: np.ndarray
    # samples whose warp stayed inside the right image
    window_included: np.ndarray
    posterior: float
    compensation_ratio: float = 1.0


@dataclass(frozen=True)
class SpatialMask:
    size: int
    weights: np.ndarray


@njit(cache=True)
def boltzmann_energy(ss, n, size, sigma_r, length):
    """Exponent of the likelihood; ``ss`` is rescaled to a full ``size`` x ``size`` patch."""
    full = ss * (size * size) / n
    return full / (2.0 * sigma_r * sigma_r * length * length)


@njit(cache=True)
def window_kernel(T, T_valid, G, G_valid, R, R_valid, ox, oy, u, offsets,
                  sigma_r, length, ratio, energies, included, centre_ss=0.0, centre_n=-1):
    """Fill ``energies``/``included`` for every window offset and return the posterior.

    The posterior is evaluated as ``ratio / sum(exp(E_c - E_i))`` which is the
    centre likelihood over the window sum without underflowing when every
    residual in the window is large.
    """
    size = T.shape[0] * T.shape[1]
    side = np.sqrt(size)
    centre = -1
    for i in range(offsets.shape[0]):
        if offsets[i] == 0.0 and centre_n >= 0:
            ss, n, ok = centre_ss, centre_n, True
        else:
            ss, n, _, ok = patch_terms(T, T_valid, G, G_valid, R, R_valid, ox, oy, u + offsets[i])
        if ok and n > 0:
            energies[i] = boltzmann_energy(ss, n, side, sigma_r, length)
            included[i] = True
        else:
            energies[i] = np.inf
            included[i] = False
        if offsets[i] == 0.0:
            centre = i
    if centre < 0 or not included[centre]:
        return 0.0
    denom = 0.0
    for i in range(offsets.shape[0]):
        if included[i]:
            denom += np.exp(energies[centre] - energies[i])
    return ratio / denom


def illumination_probability(tmpl: PatchTemplate, right: GrayImage, disparity: float,
                             sigma_r: float = 4.0, length: float | None = None) -> float:
    """Boltzmann likelihood of the right patch given the left one at ``disparity``.

    ``length`` is the normalisation length in the exponent; it defaults to the
    patch side so the exponent is the mean squared residual over 2 sigma_r^2.
    """
    if sigma_r <= 0:
        raise ValueError("sigma_r must be positive")
    ss, n, _, ok = patch_terms(tmpl.intensities, tmpl.valid, tmpl.grad_x, tmpl.grad_valid,
                               right.data, right.valid, tmpl.origin[0], tmpl.origin[1], float(disparity))
    if not ok:
        raise IndexError(f"disparity {disparity} warps the patch outside the right image")
    if n == 0:
        raise ValueError("no pixel is valid in both images")
    length = float(length or tmpl.size)
    return float(np.exp(-boltzmann_energy(ss, n, float(tmpl.size), sigma_r, length)))


def window_posterior(tmpl: PatchTemplate, right: GrayImage, est: PatchEstimate,
                     cfg: SolverConfig | None = None) -> PatchPosterior:
    cfg = cfg or SolverConfig()
    if est.status != PatchStatus.CONVERGED:
        raise ValueError(f"window_posterior needs a converged estimate, got {est.status.name}")
    offsets = np.asarray(cfg.window_offsets(), dtype=np.float64)
    energies = np.empty_like(offsets)
    included = np.zeros(offsets.shape, dtype=bool)
    post = window_kernel(
        tmpl.intensities, tmpl.valid, tmpl.grad_x, tmpl.grad_valid, right.data, right.valid,
        tmpl.origin[0], tmpl.origin[1], est.disparity, offsets, cfg.sigma_r, cfg.boltzmann_s,
        cfg.compensation_ratio, energies, included,
    )
    return PatchPosterior(
        patch_id=est.patch_id,
        center_disparity=est.disparity,
        window_disparities=est.disparity + offsets,
        window_likelihoods=np.where(included, np.exp(-energies), 0.0),
        window_included=included,
        posterior=float(post),
        compensation_ratio=cfg.compensation_ratio,
    )


def make_spatial_mask(size: int, sigma_s: float = 4.0, form=MaskForm.CENTERED) -> SpatialMask:
    """Per-pixel confidence inside a patch, peaked at the geometric centre.

    ``form="literal"`` sums the squared distance to every pixel of the patch
    instead of using the centroid; the two differ by a factor ``size**2`` in
    variance and a constant that cancels during fusion.
    """
    if size < 1 or sigma_s <= 0:
        raise ValueError("size must be >= 1 and sigma_s > 0")
    c = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64)
    dy, dx = np.meshgrid(coords - c, coords - c, indexing="ij")
    d2 = dx * dx + dy * dy
    if MaskForm(form) is MaskForm.LITERAL:
        spread = np.sum(d2)
        d2 = size * size * d2 + spread
    weights = np.exp(-d2 / (2.0 * sigma_s * sigma_s))
    weights.flags.writeable = False
    return SpatialMask(size, weights)


def pixel_weight(pp: PatchPosterior, mask: SpatialMask, local) -> float:
    dx, dy = local
    if not (0 <= dx < mask.size and 0 <= dy < mask.size):
        raise IndexError(f"offset {local} outside a {mask.size}x{mask.size} patch")
    return pp.posterior * float(mask.weights[dy, dx])
