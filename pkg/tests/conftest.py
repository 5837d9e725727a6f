import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from stereo_bdis.image_core import GrayImage


def smooth_texture(height, width, seed=0, sigma=1.5):
    rng = np.random.default_rng(seed)
    t = gaussian_filter(rng.standard_normal((height, width)), sigma)
    t = (t - t.min()) / (t.max() - t.min())
    return 30.0 + 190.0 * t


def shifted_pair(height, width, shift, seed=0, sigma=1.5):
    """Left/right rows sampled from one wide texture so that I_r(x - shift) = I_l(x).

    Sub-pixel shifts use np.interp along each row.
    """
    margin = int(np.ceil(abs(shift))) + 2
    tex = smooth_texture(height, width + 2 * margin, seed, sigma)
    xs = np.arange(width, dtype=np.float64) + margin
    left = tex[:, margin:margin + width]
    right = np.stack([np.interp(xs + shift, np.arange(tex.shape[1]), row) for row in tex])
    return GrayImage.from_array(left), GrayImage.from_array(right)


def brute_ssd(left, right, origin, size, disparities):
    """Reference SSD curve of one patch, using np.interp for the right-image lerp."""
    ox, oy = origin
    L = left.data[oy:oy + size, ox:ox + size]
    cols = np.arange(right.width, dtype=np.float64)
    out = []
    for u in disparities:
        xs = np.arange(ox, ox + size) - u
        R = np.stack([np.interp(xs, cols, right.data[oy + j]) for j in range(size)])
        out.append(float(np.sum((R - L) ** 2)))
    return np.array(out)


def basin_of(curve):
    """Index interval [a, b] of the descending basin around the argmin of ``curve``."""
    k = int(np.argmin(curve))
    a = k
    while a > 0 and curve[a - 1] >= curve[a]:
        a -= 1
    b = k
    while b < len(curve) - 1 and curve[b + 1] >= curve[b]:
        b += 1
    return a, b


@pytest.fixture
def textured():
    return GrayImage.from_array(smooth_texture(64, 96, seed=3))


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns ``passed`` so callers can assert on it."""
    def record(number, name, passed, detail):
        line = f"criterion {number} {name}: {'PASS' if passed else 'FAIL'} ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
