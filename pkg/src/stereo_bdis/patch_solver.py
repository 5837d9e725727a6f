"""Per-patch horizontal alignment by inverse-compositional Gauss-Newton.

The template side (left patch intensities, x-gradients and the scalar
Hessian) is fixed once per patch. Each iteration only samples the right
image along the row, so no right-image derivative is ever needed.

Sign convention: a left pixel at column ``x`` is matched with the right
pixel at ``x - u``, so ``u >= 0`` for points in front of the cameras.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import SolverConfig
from .image_core import GrayImage, gradient_x


class PatchStatus(enum.IntEnum):
    CONVERGED = 0
    MAX_ITERATIONS = 1
    DEGENERATE = 2
    OUT_OF_BOUNDS = 3
    SADDLE_REJECTED = 4
    INSUFFICIENT_VALID = 5


CONVERGED = int(PatchStatus.CONVERGED)
MAX_ITERATIONS = int(PatchStatus.MAX_ITERATIONS)
DEGENERATE = int(PatchStatus.DEGENERATE)
OUT_OF_BOUNDS = int(PatchStatus.OUT_OF_BOUNDS)
SADDLE_REJECTED = int(PatchStatus.SADDLE_REJECTED)
INSUFFICIENT_VALID = int(PatchStatus.INSUFFICIENT_VALID)


@dataclass(frozen=True)
class PatchTemplate:
    origin: tuple[int, int]
    size: int
    intensities: np.ndarray
    valid: np.ndarray
    grad_x: np.ndarray
    grad_valid: np.ndarray
    hessian: float
    valid_count: int
    status: PatchStatus | None = None

    @property
    def usable(self) -> bool:
        return self.status is None


@dataclass(frozen=True)
class PatchEstimate:
    patch_id: int
    origin: tuple[int, int]
    disparity: float
    residual_ss: float
    iterations: int
    status: PatchStatus
    # pixels valid in both images at the final disparity
    overlap_count: int = 0

    @property
    def mean_residual(self) -> float:
        return self.residual_ss / self.overlap_count if self.overlap_count else float("inf")


@njit(cache=True)
def template_stats(T_valid, G, G_valid):
    h = 0.0
    for j in range(G.shape[0]):
        for i in range(G.shape[1]):
            if G_valid[j, i]:
                h += G[j, i] * G[j, i]
    return h, np.count_nonzero(T_valid)


@njit(cache=True)
def patch_terms(T, T_valid, G, G_valid, R, R_valid, ox, oy, u):
    """Photometric terms of the patch warped by ``u`` into the right image.

    Returns ``(ss, n, b, in_bounds)``: sum of squared residuals, number of
    pixels valid in both images, the Gauss-Newton numerator sum(g * e), and
    whether the warped window lies inside the right image.
    """
    sh, sw = T.shape
    w = R.shape[1]
    xs = ox - u
    if xs < 0.0 or xs + sw - 1 > w - 1:
        return 0.0, 0, 0.0, False
    # one shift for the whole patch: the lerp fraction is shared by all pixels
    x0 = int(np.floor(xs))
    fx = xs - x0
    ss = 0.0
    b = 0.0
    n = 0
    for j in range(sh):
        y = oy + j
        for i in range(sw):
            if not T_valid[j, i]:
                continue
            xi = x0 + i
            if fx == 0.0:
                if not R_valid[y, xi]:
                    continue
                v = R[y, xi]
            else:
                if not (R_valid[y, xi] and R_valid[y, xi + 1]):
                    continue
                v = (1.0 - fx) * R[y, xi] + fx * R[y, xi + 1]
            e = v - T[j, i]
            ss += e * e
            n += 1
            if G_valid[j, i]:
                b += G[j, i] * e
    return ss, n, b, True


@njit(cache=True)
def solve_kernel(T, T_valid, G, G_valid, hessian, R, R_valid, ox, oy, u0,
                 eps, max_iterations, max_halvings, u_min, u_max):
    """Returns ``(u, ss, n, iterations, status)``."""
    if not (u_min <= u0 <= u_max):
        return u0, 0.0, 0, 0, OUT_OF_BOUNDS
    ss, n, b, ok = patch_terms(T, T_valid, G, G_valid, R, R_valid, ox, oy, u0)
    if not ok:
        return u0, 0.0, 0, 0, OUT_OF_BOUNDS
    if n == 0:
        return u0, 0.0, 0, 0, INSUFFICIENT_VALID
    u = u0
    cost = ss / n
    for it in range(1, max_iterations + 1):
        step = b / hessian
        accepted = False
        hit_border = False
        un = u
        ssn = 0.0
        nn = 0
        bn = 0.0
        for _ in range(max_halvings + 1):
            un = u + step
            if un < u_min or un > u_max:
                hit_border = True
            else:
                ssn, nn, bn, ok = patch_terms(T, T_valid, G, G_valid, R, R_valid, ox, oy, un)
                if not ok:
                    hit_border = True
                elif nn > 0 and ssn / nn <= cost:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            # no descent direction within the halving budget: keep the best-so-far u
            if hit_border:
                return u, ss, n, it, OUT_OF_BOUNDS
            return u, ss, n, it, CONVERGED
        u = un
        ss = ssn
        n = nn
        b = bn
        cost = ss / n
        if abs(step) < eps:
            return u, ss, n, it, CONVERGED
    return u, ss, n, max_iterations, MAX_ITERATIONS


@njit(cache=True)
def saddle_kernel(T, T_valid, G, G_valid, R, R_valid, ox, oy, u, ss, n, disturbances):
    """True if some disturbed disparity has a lower per-pixel residual than ``u``."""
    base = ss / n
    for d in disturbances:
        for sign in (-1.0, 1.0):
            ssd, nd, _, ok = patch_terms(T, T_valid, G, G_valid, R, R_valid, ox, oy, u + sign * d)
            if ok and nd > 0 and ssd / nd < base:
                return True
    return False


def make_template(left: GrayImage, origin, size: int, gamma: float,
                  h_min: float = 1.0, grad: GrayImage | None = None) -> PatchTemplate:
    """Cut a ``size`` x ``size`` template out of ``left`` at ``origin = (x, y)``.

    ``grad`` may carry a precomputed :func:`gradient_x` of ``left`` so that a
    whole grid of templates shares one gradient pass.
    """
    x, y = (int(v) for v in origin)
    if x < 0 or y < 0 or x + size > left.width or y + size > left.height:
        raise IndexError(f"patch at {origin} of size {size} exceeds {left.width}x{left.height}")
    if grad is None:
        grad = gradient_x(left)
    win = np.s_[y:y + size, x:x + size]
    T, Tv = left.data[win], left.valid[win]
    G, Gv = grad.data[win], grad.valid[win]
    hessian, count = template_stats(Tv, G, Gv)
    status = None
    if count < gamma * size * size:
        status = PatchStatus.INSUFFICIENT_VALID
    elif hessian < h_min:
        status = PatchStatus.DEGENERATE
    return PatchTemplate((x, y), size, T, Tv, G, Gv, float(hessian), int(count), status)


def disparity_bounds(cfg: SolverConfig, width: int, max_disparity=None) -> tuple[float, float]:
    if max_disparity is None:
        max_disparity = cfg.max_disparity if cfg.max_disparity is not None else width / 4.0
    return float(cfg.min_disparity), float(max_disparity)


def solve_patch(tmpl: PatchTemplate, right: GrayImage, init_disparity: float,
                cfg: SolverConfig | None = None, *, patch_id: int = 0,
                max_disparity: float | None = None) -> PatchEstimate:
    cfg = cfg or SolverConfig()
    if not tmpl.usable:
        raise ValueError(f"template is {tmpl.status.name}")
    if not np.isfinite(init_disparity):
        raise ValueError("init_disparity must be finite")
    lo, hi = disparity_bounds(cfg, right.width, max_disparity)
    u, ss, n, it, status = solve_kernel(
        tmpl.intensities, tmpl.valid, tmpl.grad_x, tmpl.grad_valid, tmpl.hessian,
        right.data, right.valid, tmpl.origin[0], tmpl.origin[1], float(init_disparity),
        cfg.convergence_eps, cfg.max_iterations, cfg.max_halvings, lo, hi,
    )
    return PatchEstimate(patch_id, tmpl.origin, float(u), float(ss), int(it), PatchStatus(status), int(n))


def residual_at(tmpl: PatchTemplate, right: GrayImage, disparity: float) -> tuple[float, int] | None:
    """(sum of squared residuals, overlap count) at ``disparity``, or None if out of bounds."""
    ss, n, _, ok = patch_terms(tmpl.intensities, tmpl.valid, tmpl.grad_x, tmpl.grad_valid,
                               right.data, right.valid, tmpl.origin[0], tmpl.origin[1], float(disparity))
    return (float(ss), int(n)) if ok else None


def saddle_check(tmpl: PatchTemplate, right: GrayImage, est: PatchEstimate,
                 disturbances=(0.5, 1.0)) -> PatchEstimate:
    """Reject ``est`` if nudging it by any of ``disturbances`` lowers the residual.

    Residuals are compared per overlapping pixel so that a disturbance which
    drops a few invalid pixels does not look like an improvement. Out of
    bounds disturbances are skipped.
    """
    if est.status != PatchStatus.CONVERGED:
        raise ValueError("saddle_check expects a converged estimate")
    if est.overlap_count == 0:
        return est
    rejected = saddle_kernel(
        tmpl.intensities, tmpl.valid, tmpl.grad_x, tmpl.grad_valid, right.data, right.valid,
        tmpl.origin[0], tmpl.origin[1], est.disparity, est.residual_ss, est.overlap_count,
        np.asarray(disturbances, dtype=np.float64),
    )
    if not rejected:
        return est
    return PatchEstimate(est.patch_id, est.origin, est.disparity, est.residual_ss,
                         est.iterations, PatchStatus.SADDLE_REJECTED, est.overlap_count)
