"""Momentum-aware dynamic threshold for keyframe admission."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import DecayMode, SelectorConfig, validate_config


class Decision(str, enum.Enum):
    SELECT = "Select"
    SKIP = "Skip"
    FORCED_SELECT = "ForcedSelect"


@dataclass(frozen=True)
class ObserveTrace:
    theta_effective: float
    mu: Optional[float] = None
    sigma: Optional[float] = None


def window_stats(errors: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation of a window of errors."""
    e = np.asarray(errors, dtype=np.float64)
    mu = float(e.mean())
    sigma = float(np.sqrt(np.mean((e - mu) ** 2)))
    return mu, sigma


class ThresholdController:
    """Sequential Select/Skip state machine.

    The threshold is interpolated from ``init_threshold`` towards
    ``base_threshold`` until ``window_size`` errors have been seen, then set to
    ``max(base, mu + k*sigma)`` over the most recent window. After a
    selection the decay factor is applied according to ``cfg.decay_mode``:
    LITERAL scales the stored threshold (which the next observation
    recomputes anyway), MULTIPLIER scales the threshold used for the next
    comparison only.
    """

    def __init__(self, cfg: SelectorConfig):
        self.cfg = validate_config(cfg)
        self.window: deque[float] = deque(maxlen=cfg.window_size)
        self.t = 0
        self.theta = cfg.init_threshold
        self.decay_pending = False

    def reset(self) -> "ThresholdController":
        self.window.clear()
        self.t = 0
        self.theta = self.cfg.init_threshold
        self.decay_pending = False
        return self

    def state(self) -> tuple:
        return (tuple(self.window), self.t, self.theta, self.decay_pending)

    def observe(self, e_t: float) -> tuple[Decision, ObserveTrace]:
        if not math.isfinite(e_t) or e_t < 0:
            raise ValueError(f"error value must be finite and >= 0, got {e_t!r}")
        cfg = self.cfg
        self.window.append(float(e_t))
        self.t += 1
        mu = sigma = None
        if self.t >= cfg.window_size:
            mu, sigma = window_stats(self.window)
            self.theta = max(cfg.base_threshold, mu + cfg.sensitivity * sigma)
        else:
            # loop index of the selection loop: first observation is frame 2
            frac = (self.t + 1) / cfg.window_size
            self.theta = cfg.base_threshold * frac + cfg.init_threshold * (1.0 - frac)

        theta_eff = self.theta
        if cfg.decay_mode is DecayMode.MULTIPLIER and self.decay_pending:
            theta_eff = cfg.decay * self.theta
        self.decay_pending = False

        if e_t > theta_eff:
            if cfg.decay_mode is DecayMode.LITERAL:
                self.theta = cfg.decay * self.theta
            else:
                self.decay_pending = True
            return Decision.SELECT, ObserveTrace(theta_eff, mu, sigma)
        return Decision.SKIP, ObserveTrace(theta_eff, mu, sigma)


class FixedThresholdController:
    """Constant-threshold stand-in used by the ablation baseline."""

    def __init__(self, theta: float):
        if not theta >= 0:
            raise ValueError("fixed threshold must be >= 0")
        self.theta = float(theta)

    def reset(self) -> "FixedThresholdController":
        return self

    def observe(self, e_t: float) -> tuple[Decision, ObserveTrace]:
        if not math.isfinite(e_t) or e_t < 0:
            raise ValueError(f"error value must be finite and >= 0, got {e_t!r}")
        decision = Decision.SELECT if e_t > self.theta else Decision.SKIP
        return decision, ObserveTrace(self.theta)


def reset(cfg: SelectorConfig) -> ThresholdController:
    return ThresholdController(cfg)
