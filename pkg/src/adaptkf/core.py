"""Domain types and configuration shared by the selector modules."""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

ORTHONORMAL_TOL = 1e-6


class ConfigError(ValueError):
    """A configuration or domain-type invariant does not hold."""


def _frozen_array(values, shape=None, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if shape is not None and arr.shape != shape:
        raise ConfigError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError("intrinsics: focal lengths must be positive")
        if self.width < 2 or self.height < 2:
            raise ConfigError("intrinsics: width and height must be >= 2")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ConfigError("intrinsics: principal point outside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True, eq=False)
class Pose:
    """Camera-to-world rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen_array(self.rotation, (3, 3))
        t = _frozen_array(self.translation, (3,))
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ConfigError("pose: non-finite entries")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMAL_TOL:
            raise ConfigError("pose: rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL:
            raise ConfigError("pose: rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=np.float64)
        return cls(T[:3, :3], T[:3, 3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return (np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Frame:
    """One timestamped RGB-D observation.

    ``rgb`` is HxWx3 in [0, 1]; ``depth`` is HxW in meters where 0 or
    non-finite marks an invalid pixel.
    """

    index: int
    timestamp: float
    rgb: np.ndarray
    depth: np.ndarray
    pose: Pose
    intrinsics: Intrinsics

    def __post_init__(self):
        h, w = self.intrinsics.shape
        rgb = _frozen_array(self.rgb)
        depth = _frozen_array(self.depth)
        if rgb.shape != (h, w, 3):
            raise ConfigError(f"frame {self.index}: rgb shape {rgb.shape} does not match intrinsics {(h, w, 3)}")
        if depth.shape != (h, w):
            raise ConfigError(f"frame {self.index}: depth shape {depth.shape} does not match intrinsics {(h, w)}")
        if not np.all(np.isfinite(rgb)) or rgb.min() < 0.0 or rgb.max() > 1.0:
            raise ConfigError(f"frame {self.index}: rgb values must lie in [0, 1]")
        if np.any(depth[np.isfinite(depth)] < 0):
            raise ConfigError(f"frame {self.index}: negative depth")
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "depth", depth)

    @property
    def valid_depth(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.isfinite(self.depth) & (self.depth > 0)


class DecayMode(str, enum.Enum):
    LITERAL = "literal"
    MULTIPLIER = "multiplier"


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    c1: float = 0.01 ** 2
    c2: float = 0.03 ** 2

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigError("ssim_window: must be odd and >= 3")
        if not self.sigma > 0:
            raise ConfigError("ssim_sigma: must be positive")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ConfigError("ssim_c1/ssim_c2: must be positive")


@dataclass(frozen=True)
class SelectorConfig:
    """Selector hyperparameters. Field names double as config-file keys."""

    alpha: float = 0.7
    beta: float = 0.3
    window_size: int = 5
    sensitivity: float = 1.5
    decay: float = 0.95
    base_threshold: float = 0.05
    init_threshold: float = 0.20
    decay_mode: DecayMode = DecayMode.MULTIPLIER
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    ssim_c1: float = 0.01 ** 2
    ssim_c2: float = 0.03 ** 2
    min_valid_fraction: float = 0.05

    @property
    def ssim_params(self) -> SsimParams:
        return SsimParams(self.ssim_window, self.ssim_sigma, self.ssim_c1, self.ssim_c2)

    def replace(self, **changes) -> "SelectorConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["decay_mode"] = self.decay_mode.value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any], base: Optional["SelectorConfig"] = None) -> "SelectorConfig":
        base = base or cls()
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values = dict(data)
        if "decay_mode" in values:
            try:
                values["decay_mode"] = DecayMode(str(values["decay_mode"]).lower())
            except ValueError:
                raise ConfigError(f"decay_mode: expected one of literal, multiplier; got {data['decay_mode']!r}") from None
        return validate_config(dataclasses.replace(base, **values))


def _check(ok: bool, name: str, rule: str) -> None:
    if not ok:
        raise ConfigError(f"{name}: {rule}")


def validate_config(cfg: SelectorConfig) -> SelectorConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError naming the first violation."""
    def finite(x):
        return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)

    for name in ("alpha", "beta", "sensitivity", "decay", "base_threshold", "init_threshold",
                 "ssim_sigma", "ssim_c1", "ssim_c2", "min_valid_fraction"):
        _check(finite(getattr(cfg, name)), name, "must be a finite number")
    for name in ("window_size", "ssim_window"):
        v = getattr(cfg, name)
        _check(isinstance(v, int) and not isinstance(v, bool), name, "must be an integer")
    _check(cfg.alpha >= 0, "alpha", "must be >= 0")
    _check(cfg.beta >= 0, "beta", "must be >= 0")
    _check(cfg.alpha + cfg.beta > 0, "alpha+beta", "must be > 0")
    _check(cfg.window_size >= 2, "window_size", "must be >= 2")
    _check(cfg.sensitivity >= 0, "sensitivity", "must be >= 0")
    _check(0 < cfg.decay <= 1, "decay", "must satisfy 0 < decay <= 1")
    _check(cfg.base_threshold >= 0, "base_threshold", "must be >= 0")
    _check(cfg.init_threshold >= 0, "init_threshold", "must be >= 0")
    _check(isinstance(cfg.decay_mode, DecayMode), "decay_mode", "must be a DecayMode")
    _check(cfg.ssim_window >= 3 and cfg.ssim_window % 2 == 1, "ssim_window", "must be odd and >= 3")
    _check(cfg.ssim_sigma > 0, "ssim_sigma", "must be > 0")
    _check(cfg.ssim_c1 > 0, "ssim_c1", "must be > 0")
    _check(cfg.ssim_c2 > 0, "ssim_c2", "must be > 0")
    _check(0 <= cfg.min_valid_fraction <= 1, "min_valid_fraction", "must lie in [0, 1]")
    return cfg


def default_config() -> SelectorConfig:
    return SelectorConfig()


def load_config(path, base: Optional[SelectorConfig] = None) -> SelectorConfig:
    """Read a flat JSON object of SelectorConfig fields layered over ``base``."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed config ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a flat JSON object")
    nested = [k for k, v in data.items() if isinstance(v, (dict, list))]
    if nested:
        raise ConfigError(f"{path}: config must be flat, nested value for {nested[0]!r}")
    return SelectorConfig.from_dict(data, base=base)


@dataclass(frozen=True)
class ErrorScore:
    e_photo: float
    e_ssim: float
    e_t: float
    valid_fraction: float
    degenerate: bool = False
