"""Hybrid photometric / structural error between a frame and a warped keyframe."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from .core import ErrorScore, Frame, SelectorConfig, SsimParams
from .geometry import mask_coverage, warp_frame

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class EmptyMaskError(ValueError):
    """Raised when a metric is asked to average over zero valid pixels."""


def _check_inputs(current, warped, mask):
    current = np.asarray(current, dtype=np.float64)
    warped = np.asarray(warped, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if current.shape != warped.shape or current.shape[:2] != mask.shape:
        raise ValueError(f"shape mismatch: {current.shape}, {warped.shape}, mask {mask.shape}")
    if not mask.any():
        raise EmptyMaskError("mask selects no pixels")
    return current, warped, mask


def luminance(rgb: np.ndarray) -> np.ndarray:
    return np.asarray(rgb, dtype=np.float64) @ LUMA_WEIGHTS


def photometric_error(current, warped, mask) -> float:
    """Mean absolute difference over masked pixels, averaged over the three channels."""
    current, warped, mask = _check_inputs(current, warped, mask)
    diff = np.abs(current[mask] - warped[mask])
    return float(diff.mean(axis=-1).mean()) if diff.ndim > 1 else float(diff.mean())


def gaussian_taps(params: SsimParams) -> np.ndarray:
    r = params.window // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x ** 2) / (2.0 * params.sigma ** 2))
    return g / g.sum()


def _smooth(stack: np.ndarray, taps: np.ndarray) -> np.ndarray:
    out = correlate1d(stack, taps, axis=-2, mode="constant", cval=0.0)
    return correlate1d(out, taps, axis=-1, mode="constant", cval=0.0)


def ssim_map(x: np.ndarray, y: np.ndarray, mask: np.ndarray, params: SsimParams) -> np.ndarray:
    """Per-pixel SSIM of two single-channel images.

    Local statistics use Gaussian weights restricted to in-image, mask-true
    pixels and renormalized over that support. Entries at mask-false centers
    are undefined (NaN).
    """
    taps = gaussian_taps(params)
    m = mask.astype(np.float64)
    mx, my = m * x, m * y
    norm, sx, sy, sxx, syy, sxy = _smooth(np.stack([m, mx, my, mx * x, my * y, mx * y]), taps)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu_x = sx / norm
        mu_y = sy / norm
        var_x = sxx / norm - mu_x ** 2
        var_y = syy / norm - mu_y ** 2
        cov = sxy / norm - mu_x * mu_y
        num = (2 * mu_x * mu_y + params.c1) * (2 * cov + params.c2)
        den = (mu_x ** 2 + mu_y ** 2 + params.c1) * (var_x + var_y + params.c2)
        out = num / den
    out[~mask] = np.nan
    return out


def ssim_error(current, warped, mask, params: SsimParams = SsimParams()) -> float:
    """One minus the mean SSIM over mask-true centers, computed on luminance."""
    current, warped, mask = _check_inputs(current, warped, mask)
    x = luminance(current) if current.ndim == 3 else current
    y = luminance(warped) if warped.ndim == 3 else warped
    s = ssim_map(x, y, mask, params)
    return float(1.0 - s[mask].mean())


def combine(e_photo: float, e_ssim: float, alpha: float, beta: float) -> float:
    return alpha * e_photo + beta * e_ssim


def hybrid_error(current: Frame, keyframe: Frame, cfg: SelectorConfig) -> ErrorScore:
    """Warp ``keyframe`` into ``current``'s view and score the difference.

    A score whose mask coverage is below ``cfg.min_valid_fraction`` is flagged
    degenerate; with an empty mask all error fields are zero.
    """
    result = warp_frame(keyframe, current.pose, current.intrinsics)
    coverage = mask_coverage(result)
    degenerate = coverage < cfg.min_valid_fraction or coverage == 0.0
    if coverage == 0.0:
        return ErrorScore(0.0, 0.0, 0.0, 0.0, degenerate=True)
    e_photo = photometric_error(current.rgb, result.warped, result.mask)
    # S can overshoot 1 by rounding for identical inputs
    e_ssim = max(0.0, ssim_error(current.rgb, result.warped, result.mask, cfg.ssim_params))
    e_t = combine(e_photo, e_ssim, cfg.alpha, cfg.beta)
    return ErrorScore(e_photo, e_ssim, e_t, coverage, degenerate=degenerate)
