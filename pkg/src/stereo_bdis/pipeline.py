"""Coarse-to-fine matcher: pyramid, patch grid, solve/vet/weight, fuse, propagate."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .bayesian import make_spatial_mask, window_kernel
from .config import FusionMode, SolverConfig
from .fusion import DisparityMap, fuse_weighted, residual_weights, upsample_disparity
from .image_core import DimensionError, GrayImage, build_pyramid, gradient_x
from .patch_solver import (
    CONVERGED,
    DEGENERATE,
    INSUFFICIENT_VALID,
    SADDLE_REJECTED,
    PatchEstimate,
    PatchStatus,
    saddle_kernel,
    solve_kernel,
    template_stats,
)

# the installed TBB is too old for numba and only produces a warning on probe
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def patch_grid(level_size, patch_size: int, stride: int) -> list[tuple[int, int]]:
    """Row-major patch origins; the last row/column is clamped to abut the border."""
    width, height = level_size
    if width < patch_size or height < patch_size:
        raise DimensionError(f"{width}x{height} level is smaller than a {patch_size}px patch")
    xs = _axis_origins(width, patch_size, stride)
    ys = _axis_origins(height, patch_size, stride)
    return [(x, y) for y in ys for x in xs]


def _axis_origins(extent, size, stride):
    last = extent - size
    origins = list(range(0, last + 1, stride))
    if origins[-1] != last:
        origins.append(last)
    return origins


def set_threads(threads: int | None) -> int:
    """Set the numba worker count (0 or None = all available); returns the count used."""
    available = numba.config.NUMBA_NUM_THREADS
    n = available if not threads else max(1, min(int(threads), available))
    numba.set_num_threads(n)
    return n


@njit(parallel=True, cache=True)
def solve_level(L, L_valid, G, G_valid, R, R_valid, ox, oy, init, size, min_count,
                h_min, eps, max_iterations, max_halvings, u_min, u_max,
                disturbances, offsets, sigma_r, length, ratio, saddle_idx):
    """Solve, vet and weight every patch of one level.

    ``saddle_idx`` lists the window slots that coincide with the saddle
    disturbances; when it is non-empty the saddle test reuses the window
    energies instead of re-sampling (energies are monotone in the per-pixel
    residual, so the comparison is the same).
    """
    n = ox.shape[0]
    nw = offsets.shape[0]
    u_out = np.zeros(n)
    ss_out = np.zeros(n)
    cnt_out = np.zeros(n, dtype=np.int64)
    it_out = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    post = np.full(n, np.nan)
    energies = np.full((n, nw), np.inf)
    included = np.zeros((n, nw), dtype=np.bool_)
    for k in prange(n):
        x0 = ox[k]
        y0 = oy[k]
        T = L[y0:y0 + size, x0:x0 + size]
        Tv = L_valid[y0:y0 + size, x0:x0 + size]
        Gk = G[y0:y0 + size, x0:x0 + size]
        Gv = G_valid[y0:y0 + size, x0:x0 + size]
        hessian, count = template_stats(Tv, Gk, Gv)
        if count < min_count:
            status[k] = INSUFFICIENT_VALID
            continue
        if hessian < h_min:
            status[k] = DEGENERATE
            continue
        u, ss, cnt, it, st = solve_kernel(T, Tv, Gk, Gv, hessian, R, R_valid, x0, y0, init[k],
                                          eps, max_iterations, max_halvings, u_min, u_max)
        u_out[k] = u
        ss_out[k] = ss
        cnt_out[k] = cnt
        it_out[k] = it
        if st == CONVERGED and nw > 0:
            post[k] = window_kernel(T, Tv, Gk, Gv, R, R_valid, x0, y0, u, offsets,
                                    sigma_r, length, ratio, energies[k], included[k], ss, cnt)
        if st == CONVERGED and disturbances.shape[0] > 0:
            if saddle_idx.shape[0] > 0:
                centre = nw // 2
                for i in saddle_idx:
                    if included[k, i] and energies[k, i] < energies[k, centre]:
                        st = SADDLE_REJECTED
                        break
            elif saddle_kernel(T, Tv, Gk, Gv, R, R_valid, x0, y0, u, ss, cnt, disturbances):
                st = SADDLE_REJECTED
        if st != CONVERGED:
            post[k] = np.nan
        status[k] = st
    return u_out, ss_out, cnt_out, it_out, status, post, energies, included


def _shared_slots(offsets, disturbances):
    slots = []
    for d in disturbances:
        for signed in (-d, d):
            hit = np.flatnonzero(offsets == signed)
            if hit.size == 0:
                return np.zeros(0, dtype=np.int64)
            slots.append(int(hit[0]))
    return np.array(slots, dtype=np.int64)


@njit(cache=True)
def sample_inits(disp, valid, ox, oy, size):
    """Read the propagated map at each patch centre, else the footprint mean, else 0."""
    n = ox.shape[0]
    out = np.zeros(n)
    c = size // 2
    for k in range(n):
        cy = oy[k] + c
        cx = ox[k] + c
        if valid[cy, cx]:
            out[k] = disp[cy, cx]
            continue
        acc = 0.0
        m = 0
        for y in range(oy[k], oy[k] + size):
            for x in range(ox[k], ox[k] + size):
                if valid[y, x]:
                    acc += disp[y, x]
                    m += 1
        if m > 0:
            out[k] = acc / m
    return out


@dataclass
class LevelResult:
    level: int
    origins: np.ndarray
    init: np.ndarray
    disparity: np.ndarray
    residual_ss: np.ndarray
    overlap: np.ndarray
    iterations: np.ndarray
    status: np.ndarray
    posterior: np.ndarray
    weights: np.ndarray
    fused: DisparityMap

    def estimates(self) -> list[PatchEstimate]:
        return [
            PatchEstimate(k, (int(o[0]), int(o[1])), float(self.disparity[k]), float(self.residual_ss[k]),
                          int(self.iterations[k]), PatchStatus(int(self.status[k])), int(self.overlap[k]))
            for k, o in enumerate(self.origins)
        ]

    def status_counts(self) -> dict[str, int]:
        return {s.name: int(np.count_nonzero(self.status == s)) for s in PatchStatus}


@dataclass
class PipelineResult:
    disparity: DisparityMap
    levels: list[LevelResult]
    timings: dict[str, float] = field(default_factory=dict)
    config: SolverConfig | None = None


def run(left: GrayImage, right: GrayImage, cfg: SolverConfig | None = None,
        threads: int | None = None) -> PipelineResult:
    """Match a rectified pair and keep per-level diagnostics and stage timings (ms)."""
    if left.shape != right.shape:
        raise DimensionError(f"left {left.width}x{left.height} != right {right.width}x{right.height}")
    cfg = (cfg or SolverConfig()).resolved(left.width, left.height)
    if threads is not None:
        set_threads(threads)
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    t = time.perf_counter()
    lp = build_pyramid(left, cfg.num_levels, cfg.patch_size)
    rp = build_pyramid(right, cfg.num_levels, cfg.patch_size)
    timings["pyramid"] = (time.perf_counter() - t) * 1e3

    bayes = cfg.fusion_mode is FusionMode.BAYESIAN
    s = cfg.patch_size
    mask = make_spatial_mask(s, cfg.sigma_s, cfg.mask_form)
    min_count = max(1, int(np.ceil(cfg.gamma * s * s))) if bayes else 1
    disturbances = np.asarray(cfg.disturbances if bayes else (), dtype=np.float64)
    offsets = np.asarray(cfg.window_offsets() if bayes else (), dtype=np.float64)
    saddle_idx = _shared_slots(offsets, disturbances)

    prev: DisparityMap | None = None
    levels: list[LevelResult] = []
    for lvl in range(cfg.num_levels - 1, -1, -1):
        L, R = lp[lvl], rp[lvl]
        tag = f"level{lvl}"

        t = time.perf_counter()
        grid = np.array(patch_grid((L.width, L.height), s, cfg.patch_stride), dtype=np.int64)
        ox, oy = grid[:, 0].copy(), grid[:, 1].copy()
        if prev is None:
            init = np.zeros(len(grid))
        else:
            up = upsample_disparity(prev, (L.width, L.height))
            init = sample_inits(up.disparity.astype(np.float64), up.valid, ox, oy, s)
        grad = gradient_x(L) if L.width >= 3 else GrayImage(np.zeros(L.shape), np.zeros(L.shape, bool))
        timings[f"{tag}.prepare"] = (time.perf_counter() - t) * 1e3

        t = time.perf_counter()
        u_max = cfg.max_disparity / (1 << lvl)
        u, ss, cnt, its, status, post, _, _ = solve_level(
            L.data, L.valid, grad.data, grad.valid, R.data, R.valid, ox, oy, init, s, min_count,
            cfg.h_min, cfg.convergence_eps, cfg.max_iterations, cfg.max_halvings,
            cfg.min_disparity, u_max, disturbances, offsets, cfg.sigma_r, cfg.boltzmann_s,
            cfg.compensation_ratio, saddle_idx,
        )
        timings[f"{tag}.solve"] = (time.perf_counter() - t) * 1e3

        t = time.perf_counter()
        keep = status == CONVERGED
        if bayes:
            weights = post[keep, None, None] * mask.weights[None, :, :]
        else:
            weights = residual_weights(L.data, L.valid, R.data, R.valid, ox[keep], oy[keep], u[keep], s)
        fused = fuse_weighted(grid[keep], u[keep], weights, (L.width, L.height), L.valid)
        timings[f"{tag}.fuse"] = (time.perf_counter() - t) * 1e3

        levels.append(LevelResult(lvl, grid, init, u, ss, cnt, its, status, post, weights, fused))
        prev = fused

    timings["total"] = (time.perf_counter() - t_start) * 1e3
    return PipelineResult(prev, levels, timings, cfg)


def compute_disparity(left: GrayImage, right: GrayImage, cfg: SolverConfig | None = None,
                      threads: int | None = None) -> DisparityMap:
    return run(left, right, cfg, threads).disparity
