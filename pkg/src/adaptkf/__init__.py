"""Online adaptive keyframe selection for posed RGB-D streams."""

__version__ = "0.1.0"

from .controller import Decision, ThresholdController, window_stats
from .core import (
    ConfigError,
    DecayMode,
    ErrorScore,
    Frame,
    Intrinsics,
    Pose,
    SelectorConfig,
    SsimParams,
    default_config,
    load_config,
    validate_config,
)
from .geometry import WarpResult, mask_coverage, warp_frame
from .metrics import combine, hybrid_error, photometric_error, ssim_error
from .pipeline import SelectionResult, TraceRow, compute_kfcr, select, select_streaming

__all__ = [
    "ConfigError", "DecayMode", "Decision", "ErrorScore", "Frame", "Intrinsics", "Pose",
    "SelectionResult", "SelectorConfig", "SsimParams", "ThresholdController", "TraceRow", "WarpResult",
    "combine", "compute_kfcr", "default_config", "hybrid_error", "load_config", "mask_coverage",
    "photometric_error", "select", "select_streaming", "ssim_error", "validate_config", "warp_frame",
    "window_stats",
]
