"""Baseline strategies, comparison proxies and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

from . import __version__
from .controller import Decision, FixedThresholdController
from .core import Frame, SelectorConfig, default_config, validate_config
from .metrics import hybrid_error
from .pipeline import SelectionResult, TraceRow, compute_kfcr, select

CSV_HEADER = ["strategy", "frame", "timestamp", "e_photo", "e_ssim", "e_t", "theta", "decision"]


@dataclass(frozen=True)
class Adaptive:
    config: SelectorConfig = field(default_factory=default_config)

    @property
    def name(self) -> str:
        return "adaptive"


@dataclass(frozen=True)
class UniformEveryN:
    """Every ``stride``-th frame; ``config`` only drives the error proxies."""

    stride: int
    config: SelectorConfig = field(default_factory=default_config)

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("uniform stride must be >= 1")

    @property
    def name(self) -> str:
        return f"uniform-{self.stride}"


@dataclass(frozen=True)
class FixedThreshold:
    theta: float
    config: SelectorConfig = field(default_factory=default_config)

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError("fixed threshold must be >= 0")

    @property
    def name(self) -> str:
        return f"fixed-{self.theta:g}"


StrategySpec = Union[Adaptive, UniformEveryN, FixedThreshold]


def _uniform(frames: Sequence[Frame], stride: int, cfg: SelectorConfig) -> SelectionResult:
    cfg = validate_config(cfg)
    trace, keyframes = [], []
    last_kf = None
    for pos, frame in enumerate(frames):
        if last_kf is None:
            trace.append(TraceRow(frame.index, frame.timestamp, 0.0, 0.0, 0.0, None, None, None, 1.0,
                                  Decision.FORCED_SELECT, None))
        else:
            s = hybrid_error(frame, last_kf, cfg)
            decision = Decision.SELECT if pos % stride == 0 else Decision.SKIP
            trace.append(TraceRow(frame.index, frame.timestamp, s.e_photo, s.e_ssim, s.e_t, None, None, None,
                                  s.valid_fraction, decision, last_kf.index))
        if pos % stride == 0:
            keyframes.append(frame.index)
            last_kf = frame
    if not trace:
        raise ValueError("run_strategy: empty frame sequence")
    return SelectionResult(keyframes, trace, compute_kfcr(len(trace), len(keyframes)), cfg)


def run_strategy(frames: Sequence[Frame], strategy: StrategySpec) -> SelectionResult:
    if isinstance(strategy, Adaptive):
        return select(frames, strategy.config)
    if isinstance(strategy, UniformEveryN):
        return _uniform(frames, strategy.stride, strategy.config)
    if isinstance(strategy, FixedThreshold):
        return select(frames, strategy.config, controller=FixedThresholdController(strategy.theta))
    raise TypeError(f"unknown strategy {strategy!r}")


def budget_matched_stride(n_frames: int, n_keyframes: int) -> int:
    """Largest stride whose uniform schedule keeps at least ``n_keyframes`` frames."""
    for stride in range(max(1, n_frames), 0, -1):
        if math.ceil(n_frames / stride) >= n_keyframes:
            return stride
    return 1


def skipped_errors(trace: Sequence[TraceRow]) -> list[float]:
    return [r.e_t for r in trace if r.decision is Decision.SKIP]


@dataclass
class StrategyOutcome:
    name: str
    keyframes: list[int]
    kfcr: float
    mean_skipped_error: float
    max_inter_keyframe_error: float
    config: SelectorConfig
    trace: list[TraceRow]
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class ComparisonReport:
    meta: dict[str, Any]
    strategies: list[StrategyOutcome]

    def outcome(self, name: str) -> StrategyOutcome:
        for s in self.strategies:
            if s.name == name:
                return s
        raise KeyError(name)


def outcome_from_result(name: str, result: SelectionResult, params: Optional[dict] = None) -> StrategyOutcome:
    skipped = skipped_errors(result.trace)
    return StrategyOutcome(
        name=name,
        keyframes=list(result.keyframes),
        kfcr=result.kfcr,
        mean_skipped_error=sum(skipped) / len(skipped) if skipped else 0.0,
        max_inter_keyframe_error=max(skipped) if skipped else 0.0,
        config=result.config,
        trace=list(result.trace),
        params=dict(params or {}),
    )


def _params(strategy: StrategySpec) -> dict:
    if isinstance(strategy, UniformEveryN):
        return {"stride": strategy.stride}
    if isinstance(strategy, FixedThreshold):
        return {"theta": strategy.theta}
    return {}


def compare(frames: Sequence[Frame], strategies: Sequence[StrategySpec], input_label: str = "",
            config: Optional[SelectorConfig] = None) -> ComparisonReport:
    """Run every strategy on the same frames and collect proxies.

    The proxies stand in for reconstruction quality: the mean error of
    skipped frames (redundancy) and the largest error of any skipped frame
    against its preceding keyframe (worst unrepresented change).
    """
    if not strategies:
        raise ValueError("compare: no strategies requested")
    frames = list(frames)
    outcomes = [outcome_from_result(s.name, run_strategy(frames, s), _params(s)) for s in strategies]
    meta_cfg = config if config is not None else strategies[0].config
    return ComparisonReport(make_meta(meta_cfg, input_label), outcomes)


def make_meta(config: SelectorConfig, input_label: str = "") -> dict[str, Any]:
    return {"config": config.to_dict(), "input": str(input_label), "tool_version": __version__}


def report_from_selection(result: SelectionResult, input_label: str = "") -> ComparisonReport:
    return ComparisonReport(make_meta(result.config, input_label), [outcome_from_result("adaptive", result)])


# --- serialization ---------------------------------------------------------

def _enc_theta(x: Optional[float]):
    if x is None or math.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf"


def _dec_theta(x):
    return float(x) if isinstance(x, str) else x


def _row_to_dict(strategy: str, r: TraceRow) -> dict:
    return {
        "strategy": strategy,
        "frame_index": r.frame_index,
        "timestamp": r.timestamp,
        "e_photo": r.e_photo,
        "e_ssim": r.e_ssim,
        "e_t": r.e_t,
        "theta_effective": _enc_theta(r.theta_effective),
        "mu": r.mu,
        "sigma": r.sigma,
        "valid_fraction": r.valid_fraction,
        "decision": r.decision.value,
        "keyframe_ref": r.keyframe_ref,
    }


def _row_from_dict(d: dict) -> TraceRow:
    return TraceRow(d["frame_index"], d["timestamp"], d["e_photo"], d["e_ssim"], d["e_t"],
                    _dec_theta(d["theta_effective"]), d["mu"], d["sigma"], d["valid_fraction"],
                    Decision(d["decision"]), d["keyframe_ref"])


def report_to_dict(report: ComparisonReport) -> dict:
    return {
        "meta": {k: report.meta[k] for k in ("config", "input", "tool_version")},
        "strategies": [
            {
                "name": s.name,
                "params": {k: _enc_theta(v) for k, v in s.params.items()},
                "config": s.config.to_dict(),
                "keyframes": s.keyframes,
                "kfcr": s.kfcr,
                "proxies": {
                    "mean_skipped_error": s.mean_skipped_error,
                    "max_inter_keyframe_error": s.max_inter_keyframe_error,
                },
            }
            for s in report.strategies
        ],
        "trace": [_row_to_dict(s.name, r) for s in report.strategies for r in s.trace],
    }


def report_from_dict(doc: dict) -> ComparisonReport:
    rows: dict[str, list[TraceRow]] = {}
    for d in doc["trace"]:
        rows.setdefault(d["strategy"], []).append(_row_from_dict(d))
    strategies = [
        StrategyOutcome(
            name=s["name"],
            keyframes=list(s["keyframes"]),
            kfcr=s["kfcr"],
            mean_skipped_error=s["proxies"]["mean_skipped_error"],
            max_inter_keyframe_error=s["proxies"]["max_inter_keyframe_error"],
            config=SelectorConfig.from_dict(s["config"]),
            trace=rows.get(s["name"], []),
            params={k: _dec_theta(v) for k, v in s.get("params", {}).items()},
        )
        for s in doc["strategies"]
    ]
    return ComparisonReport(dict(doc["meta"]), strategies)


def emit_report(report: ComparisonReport, fmt: str = "json") -> bytes:
    fmt = fmt.lower()
    if fmt == "json":
        text = json.dumps(report_to_dict(report), indent=2, allow_nan=False) + "\n"
        return text.encode("utf-8")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in report.strategies:
            for r in s.trace:
                theta = "" if r.theta_effective is None else repr(r.theta_effective)
                w.writerow([s.name, r.frame_index, repr(r.timestamp), repr(r.e_photo), repr(r.e_ssim),
                            repr(r.e_t), theta, r.decision.value])
        return buf.getvalue().encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(data: bytes) -> ComparisonReport:
    return report_from_dict(json.loads(data.decode("utf-8")))
