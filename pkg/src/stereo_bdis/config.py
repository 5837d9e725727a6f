"""Solver configuration and the ``key = value`` config file format."""
from __future__ import annotations

import ast
import dataclasses
import enum
from dataclasses import dataclass
from pathlib import Path

from .image_core import ConfigurationError


class FusionMode(str, enum.Enum):
    RESIDUAL_INVERSE = "dis"
    BAYESIAN = "bdis"

    @classmethod
    def parse(cls, value) -> "FusionMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "dis": cls.RESIDUAL_INVERSE,
            "residualinverse": cls.RESIDUAL_INVERSE,
            "residual_inverse": cls.RESIDUAL_INVERSE,
            "bdis": cls.BAYESIAN,
            "bayesian": cls.BAYESIAN,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigurationError(f"unknown fusion mode {value!r}") from None


class MaskForm(str, enum.Enum):
    CENTERED = "centered"
    LITERAL = "literal"


@dataclass(frozen=True)
class SolverConfig:
    """Every tunable of the matcher.

    ``num_levels``, ``gamma`` and ``max_disparity`` may be left as None and
    are then resolved from the input resolution by :meth:`resolved`.
    """

    patch_size: int = 8
    patch_stride: int = 4
    num_levels: int | None = None
    sigma_r: float = 4.0
    sigma_s: float = 4.0
    gamma: float | None = None
    window_samples: int = 5
    window_spacing: float = 0.5
    disturbances: tuple[float, ...] = (0.5, 1.0)
    compensation_ratio: float = 1.0
    convergence_eps: float = 0.01
    max_iterations: int = 12
    h_min: float = 1.0
    fusion_mode: FusionMode = FusionMode.BAYESIAN
    max_disparity: float | None = None
    min_disparity: float = -1.0
    # normalisation length in the Boltzmann exponent; None = patch side
    boltzmann_length: float | None = None
    mask_form: MaskForm = MaskForm.CENTERED
    max_halvings: int = 3

    def __post_init__(self):
        object.__setattr__(self, "fusion_mode", FusionMode.parse(self.fusion_mode))
        object.__setattr__(self, "mask_form", MaskForm(self.mask_form))
        object.__setattr__(self, "disturbances", tuple(float(d) for d in self.disturbances))
        self.validate()

    def validate(self):
        if self.patch_size < 1:
            raise ConfigurationError("patch_size must be >= 1")
        if not 1 <= self.patch_stride <= self.patch_size:
            raise ConfigurationError("patch_stride must be in [1, patch_size]")
        if self.window_samples < 1 or self.window_samples % 2 == 0:
            raise ConfigurationError("window_samples must be odd and positive")
        if self.gamma is not None and not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in (0, 1]")
        if self.sigma_r <= 0 or self.sigma_s <= 0:
            raise ConfigurationError("sigma_r and sigma_s must be positive")
        if self.window_spacing <= 0:
            raise ConfigurationError("window_spacing must be positive")
        if self.num_levels is not None and self.num_levels < 1:
            raise ConfigurationError("num_levels must be >= 1")
        if self.max_iterations < 1 or self.convergence_eps <= 0:
            raise ConfigurationError("max_iterations and convergence_eps must be positive")
        if self.compensation_ratio <= 0:
            raise ConfigurationError("compensation_ratio must be positive")
        if any(d <= 0 for d in self.disturbances):
            raise ConfigurationError("disturbances must be positive")

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def resolved(self, width: int, height: int) -> "SolverConfig":
        """Fill resolution-dependent defaults for a ``width`` x ``height`` input."""
        large = width * height >= 200_000
        num_levels = self.num_levels
        if num_levels is None:
            num_levels = 4 if large else 3
            while num_levels > 1 and min(width, height) >> (num_levels - 1) < self.patch_size:
                num_levels -= 1
        gamma = self.gamma if self.gamma is not None else (0.75 if large else 0.25)
        max_disp = self.max_disparity if self.max_disparity is not None else width / 4.0
        return self.replace(num_levels=num_levels, gamma=gamma, max_disparity=max_disp)

    @property
    def boltzmann_s(self) -> float:
        return float(self.boltzmann_length or self.patch_size)

    def window_offsets(self) -> list[float]:
        half = self.window_samples // 2
        return [i * self.window_spacing for i in range(-half, half + 1)]


_FIELDS = {f.name: f for f in dataclasses.fields(SolverConfig)}


def parse_config(text: str, base: SolverConfig | None = None) -> SolverConfig:
    """Parse ``key = value`` lines (``#`` comments allowed) into a SolverConfig."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value, lineno)
    try:
        return dataclasses.replace(base or SolverConfig(), **values)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc


def _coerce(key, value, lineno):
    if key in ("fusion_mode", "mask_form"):
        return value.strip("'\"")
    if value.lower() in ("none", "auto", ""):
        return None
    try:
        parsed = ast.literal_eval(value)
    except (ValueError, SyntaxError):
        raise ConfigurationError(f"line {lineno}: cannot parse value {value!r} for {key}") from None
    if key == "disturbances":
        if isinstance(parsed, (int, float)):
            parsed = (parsed,)
        return tuple(float(v) for v in parsed)
    if key in ("patch_size", "patch_stride", "num_levels", "window_samples", "max_iterations", "max_halvings"):
        if not isinstance(parsed, int) or isinstance(parsed, bool):
            raise ConfigurationError(f"line {lineno}: {key} must be an integer")
        return parsed
    if not isinstance(parsed, (int, float)) or isinstance(parsed, bool):
        raise ConfigurationError(f"line {lineno}: {key} must be numeric")
    return float(parsed)


def load_config(path, base: SolverConfig | None = None) -> SolverConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base)


def dump_config(cfg: SolverConfig) -> str:
    lines = []
    for name in _FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, enum.Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"
