import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stereo_bdis.config import (
    FusionMode,
    SolverConfig,
    dump_config,
    load_config,
    parse_config,
)
from stereo_bdis.evaluation import evaluate, median
from stereo_bdis.fusion import DisparityMap
from stereo_bdis.image_core import ConfigurationError, GrayImage
from stereo_bdis.io import (
    Camera,
    load_disparity_map,
    read_camera,
    read_image,
    read_pfm,
    read_png16,
    save_disparity_map,
    write_image,
    write_pfm,
    write_png16,
)


def _map(disp, valid=None):
    disp = np.asarray(disp, dtype=np.float32)
    valid = np.ones(disp.shape, dtype=bool) if valid is None else valid
    return DisparityMap(disp, valid.astype(np.float32), valid)


def test_pfm_header_and_layout(tmp_path):
    arr = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    write_pfm(tmp_path / "a.pfm", arr)
    raw = (tmp_path / "a.pfm").read_bytes()
    assert raw.startswith(b"Pf\n2 2\n-1.0\n")
    # bottom row first
    assert np.frombuffer(raw[-16:], "<f4").tolist() == [3.0, 4.0, 1.0, 2.0]
    np.testing.assert_array_equal(read_pfm(tmp_path / "a.pfm"), arr)


def test_pfm_big_endian(tmp_path):
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    with open(tmp_path / "b.pfm", "wb") as fh:
        fh.write(b"Pf\n3 2\n1.0\n")
        fh.write(arr[::-1].astype(">f4").tobytes())
    np.testing.assert_array_equal(read_pfm(tmp_path / "b.pfm"), arr)


def test_pfm_rejects_garbage(tmp_path):
    (tmp_path / "x.pfm").write_bytes(b"P6\n1 1\n255\n\0\0\0")
    with pytest.raises(ValueError):
        read_pfm(tmp_path / "x.pfm")


@settings(max_examples=25, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 9), st.integers(1, 9)),
              elements=st.floats(-100, 100, width=32)),
       st.integers(0, 2**16))
def test_disparity_map_round_trip(tmp_path_factory, disp, seed):
    valid = np.random.default_rng(seed).random(disp.shape) < 0.7
    disp = np.where(valid, disp, 0).astype(np.float32)
    conf = np.where(valid, np.abs(disp) + 1, 0).astype(np.float32)
    dmap = DisparityMap(disp, conf, valid)
    path = tmp_path_factory.mktemp("rt") / "d.pfm"
    _, conf_path = save_disparity_map(dmap, path)
    assert conf_path.name == "d_conf.pfm"
    back = load_disparity_map(path)
    assert back.disparity.tobytes() == dmap.disparity.tobytes()
    assert back.confidence.tobytes() == dmap.confidence.tobytes()
    assert np.array_equal(back.valid, dmap.valid)


def test_png16_quantisation(tmp_path):
    d = np.array([[1.0, 2.5, 0.0, 100.00390625]])
    write_png16(tmp_path / "d.png", d, np.array([[True, True, False, True]]))
    back, valid = read_png16(tmp_path / "d.png")
    assert valid.tolist() == [[True, True, False, True]]
    np.testing.assert_array_equal(back, np.array([[1.0, 2.5, 0.0, 100.00390625]], dtype=np.float32))


def test_image_round_trip(tmp_path):
    data = np.arange(1, 13, dtype=np.float64).reshape(3, 4) * 10
    write_image(tmp_path / "i.png", GrayImage.from_array(data))
    img = read_image(tmp_path / "i.png")
    np.testing.assert_array_equal(img.data, data)
    assert img.valid.all()


def test_evaluate_identity():
    gt = np.random.default_rng(0).uniform(0, 20, (6, 8))
    rep = evaluate(_map(gt.astype(np.float32)), gt.astype(np.float32))
    assert rep.median_error == 0 and rep.mean_error == 0
    assert rep.valid_pixels == 48 and rep.density == 1.0


def test_evaluate_half_offset():
    gt = np.zeros((4, 4))
    pred = gt.copy()
    pred[:2] += 1
    rep = evaluate(_map(pred), gt)
    assert rep.median_error == 0.5
    assert rep.mean_error == 0.5


def test_median_even_rule():
    assert median(np.array([0.0, 0.0, 1.0, 1.0])) == 0.5
    assert median(np.array([3.0, 1.0, 2.0])) == 2.0
    assert math.isnan(median(np.array([])))


def test_evaluate_counts_pred_valid_pixels():
    valid = np.zeros((4, 4), dtype=bool)
    valid[0] = True
    gt = np.full((4, 4), np.nan)
    gt[0, :2] = 0
    rep = evaluate(_map(np.zeros((4, 4)), valid), gt)
    assert rep.valid_pixels == 4
    assert rep.evaluated_pixels == 2
    assert rep.density == 2 / 16


def test_evaluate_no_joint_pixels():
    rep = evaluate(_map(np.zeros((3, 3)), np.zeros((3, 3), dtype=bool)), np.zeros((3, 3)))
    assert rep.density == 0.0
    assert math.isnan(rep.median_error) and math.isnan(rep.mean_error)
    assert "median_error=nan" in rep.metric_lines()


def test_evaluate_shape_mismatch():
    with pytest.raises(ValueError):
        evaluate(_map(np.zeros((3, 3))), np.zeros((3, 4)))


@settings(max_examples=30)
@given(st.integers(0, 2**16))
def test_sentinel_masking_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(1, 10, (5, 6))
    b = rng.uniform(1, 10, (5, 6))
    ma = rng.random((5, 6)) < 0.6
    mb = rng.random((5, 6)) < 0.6
    r1 = evaluate(_map(np.where(ma, a, 0), ma), np.where(mb, b, -1.0), invalid_sentinel=-1.0)
    r2 = evaluate(_map(np.where(mb, b, 0), mb), np.where(ma, a, -1.0), invalid_sentinel=-1.0)
    assert r1.evaluated_pixels == r2.evaluated_pixels == int((ma & mb).sum())
    if r1.evaluated_pixels:
        assert r1.mean_error == pytest.approx(r2.mean_error, rel=1e-6)


def test_camera_conversion(tmp_path):
    (tmp_path / "cam.txt").write_text("500 500 320 240 0.1\n")
    cam = read_camera(tmp_path / "cam.txt")
    assert cam == Camera(500, 500, 320, 240, 0.1)
    assert cam.depth_to_disparity(10.0) == pytest.approx(5.0)
    assert np.isnan(cam.depth_to_disparity(0.0))
    rep = evaluate(_map(np.full((2, 2), 5.0)), np.full((2, 2), 4.0), camera=cam)
    assert rep.median_depth_error == pytest.approx(50 / 4 - 50 / 5)


def test_report_table_aligned():
    rep = evaluate(_map(np.ones((2, 2))), np.zeros((2, 2)))
    lines = rep.table().splitlines()
    assert len({len(line) for line in lines}) == 1


def test_config_parsing(tmp_path):
    cfg = parse_config("""
        # comment
        patch_size = 6   # trailing
        sigma_r = 3
        fusion_mode = dis
        disturbances = (0.25, 0.5)
        gamma = none
    """)
    assert cfg.patch_size == 6 and cfg.sigma_r == 3.0
    assert cfg.fusion_mode is FusionMode.RESIDUAL_INVERSE
    assert cfg.disturbances == (0.25, 0.5)
    assert cfg.gamma is None
    (tmp_path / "c.cfg").write_text(dump_config(cfg))
    assert load_config(tmp_path / "c.cfg") == cfg


@pytest.mark.parametrize("text", [
    "bogus = 1",
    "patch_size = 2.5",
    "patch_size",
    "sigma_r = -1",
    "window_samples = 4",
    "patch_stride = 9",
    "sigma_r = 'abc'",
])
def test_config_errors(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "nope.cfg")


def test_defaults_round_trip():
    assert parse_config(dump_config(SolverConfig())) == SolverConfig()
