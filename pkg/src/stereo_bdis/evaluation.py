"""Ground-truth comparison: median / mean absolute error and valid-pixel counts."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .fusion import DisparityMap


@dataclass(frozen=True)
class EvalReport:
    median_error: float
    mean_error: float
    valid_pixels: int
    density: float
    runtime_ms: float = math.nan
    evaluated_pixels: int = 0
    bad_1px: float = math.nan
    bad_2px: float = math.nan
    # filled only when depth-space errors were requested
    median_depth_error: float = math.nan
    mean_depth_error: float = math.nan

    def as_dict(self) -> dict:
        return asdict(self)

    def metric_lines(self) -> list[str]:
        return [f"{k}={_fmt(v)}" for k, v in self.as_dict().items()]

    def table(self) -> str:
        rows = [(k.replace("_", " "), _fmt(v)) for k, v in self.as_dict().items()]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:>12}" for k, v in rows)


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def median(values: np.ndarray) -> float:
    """Median; for an even count the mean of the two central order statistics."""
    return float(np.median(values)) if values.size else math.nan


def ground_truth_mask(gt: np.ndarray, invalid_sentinel=math.nan) -> np.ndarray:
    valid = np.isfinite(gt)
    if invalid_sentinel is not None and not (isinstance(invalid_sentinel, float) and math.isnan(invalid_sentinel)):
        valid &= gt != invalid_sentinel
    return valid


def evaluate(pred: DisparityMap, gt, invalid_sentinel=math.nan, *, region=None,
             runtime_ms: float = math.nan, camera=None) -> EvalReport:
    """Compare ``pred`` with a dense disparity raster ``gt``.

    Errors are taken over pixels valid in both maps (and inside ``region``
    when given); ``valid_pixels`` counts every valid prediction. With a
    ``camera`` the depth-space errors fx*b/d are reported as well.
    """
    gt = np.asarray(gt, dtype=np.float64)
    if gt.shape != pred.disparity.shape:
        raise ValueError(f"prediction {pred.disparity.shape} and ground truth {gt.shape} differ")
    joint = pred.valid & ground_truth_mask(gt, invalid_sentinel)
    if region is not None:
        joint &= np.asarray(region, dtype=bool)
    n_eval = int(joint.sum())
    valid_pixels = int(pred.valid.sum())
    if n_eval == 0:
        return EvalReport(math.nan, math.nan, valid_pixels, 0.0, runtime_ms, 0)
    p = pred.disparity[joint].astype(np.float64)
    g = gt[joint]
    err = np.abs(p - g)
    extra = {}
    if camera is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            depth_err = np.abs(camera.disparity_to_depth(p) - camera.disparity_to_depth(g))
        depth_err = depth_err[np.isfinite(depth_err)]
        extra = dict(median_depth_error=median(depth_err),
                     mean_depth_error=float(depth_err.mean()) if depth_err.size else math.nan)
    return EvalReport(
        median_error=median(err),
        mean_error=float(err.mean()),
        valid_pixels=valid_pixels,
        density=n_eval / joint.size,
        runtime_ms=runtime_ms,
        evaluated_pixels=n_eval,
        bad_1px=float(np.mean(err > 1.0)),
        bad_2px=float(np.mean(err > 2.0)),
        **extra,
    )
