"""Real-time stereo disparity by patch-wise inverse search with Bayesian fusion."""
from .config import FusionMode, SolverConfig, load_config
from .fusion import DisparityMap
from .image_core import GrayImage, to_gray
from .pipeline import compute_disparity, run

__all__ = [
    "DisparityMap",
    "FusionMode",
    "GrayImage",
    "SolverConfig",
    "compute_disparity",
    "load_config",
    "run",
    "to_gray",
]
__version__ = "0.1.0"
