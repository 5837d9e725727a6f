import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereo_bdis.config import SolverConfig
from stereo_bdis.image_core import GrayImage, gradient_x
from stereo_bdis.patch_solver import (
    PatchEstimate,
    PatchStatus,
    make_template,
    residual_at,
    saddle_check,
    solve_patch,
)

from conftest import basin_of, brute_ssd, shifted_pair


def test_template_constant_is_degenerate():
    img = GrayImage.from_array(np.full((16, 16), 80.0))
    t = make_template(img, (4, 4), 8, gamma=0.75)
    assert t.hessian == 0
    assert t.status == PatchStatus.DEGENERATE


def test_template_ramp_hessian():
    img = GrayImage.from_array(np.tile(np.arange(10.0), (10, 1)))
    t = make_template(img, (3, 3), 4, gamma=0.75)
    assert t.hessian == 16.0
    assert t.status is None


def test_template_insufficient_valid(textured):
    valid = np.ones(textured.shape, dtype=bool)
    block = np.zeros((8, 8), dtype=bool)
    block.flat[:40] = True
    valid[8:16, 8:16] = block
    img = GrayImage.from_array(textured.data, valid)
    t = make_template(img, (8, 8), 8, gamma=0.75)
    assert t.valid_count == 40
    assert t.status == PatchStatus.INSUFFICIENT_VALID


def test_template_out_of_bounds(textured):
    with pytest.raises(IndexError):
        make_template(textured, (textured.width - 4, 0), 8, 0.75)


def test_template_gradients_come_from_left_only(textured):
    grad = gradient_x(textured)
    t = make_template(textured, (10, 12), 8, 0.75, grad=grad)
    np.testing.assert_array_equal(t.grad_x, grad.data[12:20, 10:18])
    assert t.hessian == pytest.approx(np.sum(grad.data[12:20, 10:18] ** 2))


def test_identity_alignment(textured):
    t = make_template(textured, (20, 20), 8, 0.75)
    est = solve_patch(t, textured, 0.0)
    assert est.status == PatchStatus.CONVERGED
    assert est.disparity == 0.0
    assert est.residual_ss == 0.0


def test_subpixel_shift_against_brute_force():
    left, right = shifted_pair(32, 64, 2.0, seed=5)
    t = make_template(left, (24, 12), 8, 0.75)
    est = solve_patch(t, right, 1.5)
    grid = np.round(np.arange(0.0, 4.0001, 0.05), 10)
    curve = brute_ssd(left, right, (24, 12), 8, grid)
    oracle = grid[np.argmin(curve)]
    assert oracle == pytest.approx(2.0)
    assert est.status == PatchStatus.CONVERGED
    assert abs(est.disparity - 2.0) < 0.05


def test_out_of_bounds_init():
    left, right = shifted_pair(16, 64, 1.0, seed=2)
    t = make_template(left, (54, 4), 8, 0.75)
    est = solve_patch(t, right, 50.0)
    assert est.status == PatchStatus.OUT_OF_BOUNDS


def test_warp_leaving_image_is_out_of_bounds():
    left, right = shifted_pair(16, 64, 1.0, seed=2)
    t = make_template(left, (2, 4), 8, 0.75)
    est = solve_patch(t, right, 3.0)
    assert est.status == PatchStatus.OUT_OF_BOUNDS


def test_rejects_unusable_template():
    img = GrayImage.from_array(np.full((16, 16), 80.0))
    with pytest.raises(ValueError):
        solve_patch(make_template(img, (0, 0), 8, 0.75), img, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.floats(-1.0, 1.0), st.integers(0, 1000))
def test_integer_shift_recovery(k, offset, seed):
    left, right = shifted_pair(24, 64, float(k), seed=seed)
    t = make_template(left, (40, 8), 8, 0.75)
    est = solve_patch(t, right, k + offset)
    assert est.status == PatchStatus.CONVERGED
    assert abs(est.disparity - k) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-0.9, 0.9), st.integers(0, 1000))
def test_never_ascends(shift, init, seed):
    left, right = shifted_pair(24, 48, shift, seed=seed)
    t = make_template(left, (20, 8), 8, 0.75)
    est = solve_patch(t, right, init, SolverConfig(min_disparity=-3.0))
    start = residual_at(t, right, init)
    if est.status in (PatchStatus.CONVERGED, PatchStatus.MAX_ITERATIONS):
        assert est.residual_ss / est.overlap_count <= start[0] / start[1] + 1e-12


def test_matches_brute_force_in_basin():
    grid = np.round(np.arange(-2.0, 2.0001, 0.01), 10)
    rng = np.random.default_rng(11)
    hits = total = 0
    for trial in range(60):
        shift = rng.uniform(-1, 1)
        left, right = shifted_pair(24, 48, shift, seed=trial)
        t = make_template(left, (20, 8), 8, 0.75)
        curve = brute_ssd(left, right, (20, 8), 8, grid)
        a, b = basin_of(curve)
        if not grid[a] <= 0.0 <= grid[b]:
            continue
        est = solve_patch(t, right, 0.0, SolverConfig(min_disparity=-3.0))
        total += 1
        hits += abs(est.disparity - grid[np.argmin(curve)]) < 0.1
    assert total >= 40
    assert hits >= 0.95 * total


def _sinusoid_image(period=8.0, width=64, height=16):
    x = np.arange(width, dtype=np.float64)
    return GrayImage.from_array(np.tile(128 + 60 * np.sin(2 * np.pi * x / period), (height, 1)))


def test_saddle_rejects_local_maximum():
    img = _sinusoid_image()
    t = make_template(img, (24, 4), 8, 0.75)
    grid = np.round(np.arange(2.0, 6.0001, 0.01), 10)
    curve = brute_ssd(img, img, (24, 4), 8, grid)
    u_max = float(grid[np.argmax(curve)])
    ss, n = residual_at(t, img, u_max)
    est = PatchEstimate(0, t.origin, u_max, ss, 3, PatchStatus.CONVERGED, n)
    assert saddle_check(t, img, est).status == PatchStatus.SADDLE_REJECTED


def test_saddle_passes_global_minimum(textured):
    t = make_template(textured, (30, 20), 8, 0.75)
    est = solve_patch(t, textured, 0.0)
    assert saddle_check(t, textured, est) == est


def test_saddle_skips_out_of_bounds_disturbance(textured):
    t = make_template(textured, (0, 20), 8, 0.75)
    est = solve_patch(t, textured, 0.0)
    assert saddle_check(t, textured, est).status == PatchStatus.CONVERGED
