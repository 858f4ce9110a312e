"""Online keyframe selection loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

from .controller import Decision, ThresholdController
from .core import ConfigError, Frame, SelectorConfig, default_config, validate_config
from .metrics import hybrid_error


@dataclass(frozen=True)
class TraceRow:
    frame_index: int
    timestamp: float
    e_photo: float
    e_ssim: float
    e_t: float
    theta_effective: Optional[float]
    mu: Optional[float]
    sigma: Optional[float]
    valid_fraction: float
    decision: Decision
    keyframe_ref: Optional[int]


@dataclass
class SelectionResult:
    keyframes: list[int]
    trace: list[TraceRow]
    kfcr: float
    config: SelectorConfig


@dataclass
class StreamSummary:
    n_frames: int
    keyframes: list[int] = field(default_factory=list)
    kfcr: float = 0.0


def compute_kfcr(n_total: int, n_selected: int) -> float:
    """Percentage of frames discarded."""
    if n_total <= 0:
        raise ValueError("kfcr: n_total must be >= 1")
    if not 1 <= n_selected <= n_total:
        raise ValueError(f"kfcr: n_selected must lie in [1, {n_total}], got {n_selected}")
    return 100.0 * (1.0 - n_selected / n_total)


def iter_decisions(frames: Iterable[Frame], cfg: SelectorConfig, controller=None,
                   scorer: Callable = hybrid_error) -> Iterator[TraceRow]:
    """Yield one TraceRow per frame, pulling frames lazily.

    Only the current frame and the last keyframe are referenced between
    iterations. Degenerate warps force a selection and are kept out of the
    controller's error window. The first frame is reported as ForcedSelect
    since it is admitted without a comparison.
    """
    cfg = validate_config(cfg)
    controller = controller if controller is not None else ThresholdController(cfg)
    controller.reset()
    last_kf = None
    shape = None
    prev_index = None
    for frame in frames:
        if prev_index is not None and frame.index <= prev_index:
            raise ConfigError(f"frames out of order: index {frame.index} after {prev_index}")
        prev_index = frame.index
        if last_kf is None:
            shape = frame.intrinsics.shape
            last_kf = frame
            yield TraceRow(frame.index, frame.timestamp, 0.0, 0.0, 0.0, None, None, None, 1.0,
                           Decision.FORCED_SELECT, None)
            continue
        if frame.intrinsics.shape != shape:
            raise ConfigError(f"frame {frame.index}: dimensions {frame.intrinsics.shape} differ from {shape}")
        score = scorer(frame, last_kf, cfg)
        ref = last_kf.index
        if score.degenerate:
            decision, theta, mu, sigma = Decision.FORCED_SELECT, None, None, None
        else:
            decision, tr = controller.observe(score.e_t)
            theta, mu, sigma = tr.theta_effective, tr.mu, tr.sigma
        if decision is not Decision.SKIP:
            last_kf = frame
        yield TraceRow(frame.index, frame.timestamp, score.e_photo, score.e_ssim, score.e_t,
                       theta, mu, sigma, score.valid_fraction, decision, ref)
        del frame


def select(frames: Iterable[Frame], cfg: Optional[SelectorConfig] = None, controller=None) -> SelectionResult:
    cfg = cfg if cfg is not None else default_config()
    trace = list(iter_decisions(frames, cfg, controller))
    if not trace:
        raise ValueError("select: empty frame sequence")
    keyframes = [r.frame_index for r in trace if r.decision is not Decision.SKIP]
    return SelectionResult(keyframes, trace, compute_kfcr(len(trace), len(keyframes)), cfg)


def select_streaming(frame_source, sink: Callable[[TraceRow], None],
                     cfg: Optional[SelectorConfig] = None, controller=None) -> StreamSummary:
    """Pull frames from ``frame_source`` and push each decision to ``sink``.

    ``frame_source`` is an iterable or a zero-argument callable returning the
    next frame (None at end of stream). Each decision reaches the sink before
    the next frame is pulled; provider errors propagate after that.
    """
    cfg = cfg if cfg is not None else default_config()
    if callable(frame_source) and not hasattr(frame_source, "__iter__"):
        frame_source = iter(frame_source, None)
    summary = StreamSummary(0)
    for row in iter_decisions(frame_source, cfg, controller):
        summary.n_frames += 1
        if row.decision is not Decision.SKIP:
            summary.keyframes.append(row.frame_index)
        sink(row)
    if summary.n_frames == 0:
        raise ValueError("select_streaming: empty frame sequence")
    summary.kfcr = compute_kfcr(summary.n_frames, len(summary.keyframes))
    return summary
