"""Command-line front-end: select, evaluate, synth, trace."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .core import ConfigError, DecayMode, SelectorConfig, default_config, load_config
from .dataio import (
    DatasetError,
    MotionSegment,
    SyntheticSpec,
    Texture,
    bursty_spec,
    generate_synthetic,
    load_sequence,
    static_dynamic_spec,
    write_sequence,
)
from .evaluation import (
    Adaptive,
    FixedThreshold,
    UniformEveryN,
    compare,
    emit_report,
    parse_report,
    report_from_selection,
)
from .pipeline import select

log = logging.getLogger("adaptkf")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for internal errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _out_path(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_bytes(path, data: bytes) -> None:
    _out_path(path).write_bytes(data)


def _config(args) -> SelectorConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "decay_mode", None):
        cfg = cfg.replace(decay_mode=DecayMode(args.decay_mode))
    return cfg


def _load(args):
    return load_sequence(args.input, max_time_delta=args.max_time_delta, quaternion_order=args.quaternion_order)


def cmd_select(args) -> int:
    cfg = _config(args)
    result = select(_load(args), cfg)
    _write_bytes(args.output, emit_report(report_from_selection(result, args.input)))
    if args.keyframes_out:
        by_index = {r.frame_index: r.timestamp for r in result.trace}
        lines = "".join(f"{k} {by_index[k]:.6f}\n" for k in result.keyframes)
        _out_path(args.keyframes_out).write_text(lines, encoding="utf-8")
    if not args.quiet:
        print(f"keyframes: {len(result.keyframes)} of {len(result.trace)}")
        print(f"KFCR: {result.kfcr:.2f}%")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    strategies = []
    if args.adaptive:
        strategies.append(Adaptive(cfg))
    strategies += [UniformEveryN(n, cfg) for n in args.uniform]
    strategies += [FixedThreshold(t, cfg) for t in args.fixed_threshold]
    if not strategies:
        raise UsageError("no strategies requested (use --adaptive, --uniform N, --fixed-threshold T)")
    report = compare(_load(args), strategies, input_label=args.input, config=cfg)
    _write_bytes(args.output, emit_report(report, "json"))
    if args.csv:
        _write_bytes(Path(args.output).with_suffix(".csv"), emit_report(report, "csv"))
    if not args.quiet:
        print(f"{'strategy':<16} {'keyframes':>9} {'kfcr':>8} {'mean_skip_e':>12} {'max_skip_e':>11}")
        for s in report.strategies:
            print(f"{s.name:<16} {len(s.keyframes):>9d} {s.kfcr:>8.2f} "
                  f"{s.mean_skipped_error:>12.5f} {s.max_inter_keyframe_error:>11.5f}")
    return EXIT_OK


def _parse_vec(text: str, n: int, what: str) -> tuple:
    parts = [p for p in text.split(",") if p != ""]
    if len(parts) != n:
        raise UsageError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise UsageError(f"{what}: non-numeric value in {text!r}") from None


def parse_segment(text: str) -> MotionSegment:
    """FRAMES[:vx,vy,vz[:wx,wy,wz[:fx,fy]]]"""
    fields = text.split(":")
    if not 1 <= len(fields) <= 4:
        raise UsageError(f"segment: malformed {text!r}")
    try:
        frames = int(fields[0])
    except ValueError:
        raise UsageError(f"segment: bad frame count in {text!r}") from None
    vel = _parse_vec(fields[1], 3, "segment velocity") if len(fields) > 1 else (0.0, 0.0, 0.0)
    ang = _parse_vec(fields[2], 3, "segment angular velocity") if len(fields) > 2 else (0.0, 0.0, 0.0)
    flow = _parse_vec(fields[3], 2, "segment scene flow") if len(fields) > 3 else (0.0, 0.0)
    return MotionSegment(frames, vel, ang, flow)


def cmd_synth(args) -> int:
    if args.spec:
        data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        if args.seed is not None:
            data["seed"] = args.seed
        spec = SyntheticSpec.from_dict(data)
    elif args.preset == "static-dynamic":
        spec = static_dynamic_spec(seed=args.seed or 0, texture=Texture(args.texture),
                                   width=args.width, height=args.height)
    elif args.preset == "bursty":
        spec = bursty_spec(args.seed or 0, frame_count=args.frames, texture=Texture(args.texture),
                           width=args.width, height=args.height)
    else:
        spec = SyntheticSpec(width=args.width, height=args.height, frame_count=args.frames,
                             texture=Texture(args.texture), plane_depth=args.plane_depth,
                             motion=tuple(parse_segment(s) for s in args.segment),
                             seed=args.seed or 0, focal=args.focal)
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    frames = generate_synthetic(spec)
    write_sequence(frames, out)
    (out / "synth_spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")
    if not args.quiet:
        print(f"wrote {len(frames)} frames to {out}")
    return EXIT_OK


def cmd_trace(args) -> int:
    try:
        report = parse_report(Path(args.input).read_bytes())
    except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError, AttributeError) as exc:
        raise UsageError(f"{args.input}: malformed report ({type(exc).__name__}: {exc})") from None
    _write_bytes(args.output, emit_report(report, "csv"))
    if not args.quiet:
        print(f"wrote {sum(len(s.trace) for s in report.strategies)} rows to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    common.add_argument("-v", "--verbose", action="count", default=0)

    seq = _Parser(add_help=False)
    seq.add_argument("--input", required=True, help="TUM-layout sequence directory")
    seq.add_argument("--config", help="flat JSON selector config")
    seq.add_argument("--decay-mode", choices=[m.value for m in DecayMode])
    seq.add_argument("--max-time-delta", type=float, default=0.02, help="association tolerance in seconds")
    seq.add_argument("--quaternion-order", choices=["xyzw", "wxyz"], default="xyzw")

    p = _Parser(prog="adaptkf", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("select", parents=[common, seq], help="run adaptive selection on a sequence")
    s.add_argument("--output", required=True, help="report JSON path")
    s.add_argument("--keyframes-out", help="plain-text list of selected 'index timestamp' lines")
    s.set_defaults(func=cmd_select)

    e = sub.add_parser("evaluate", parents=[common, seq], help="compare selection strategies")
    e.add_argument("--output", required=True, help="report JSON path")
    e.add_argument("--adaptive", action="store_true")
    e.add_argument("--uniform", type=int, action="append", default=[], metavar="N")
    e.add_argument("--fixed-threshold", type=float, action="append", default=[], metavar="THETA")
    e.add_argument("--csv", action="store_true", help="also write the per-frame CSV next to the JSON")
    e.set_defaults(func=cmd_evaluate)

    y = sub.add_parser("synth", parents=[common], help="write a synthetic sequence in TUM layout")
    y.add_argument("--output", required=True, help="output directory")
    y.add_argument("--spec", help="JSON synthetic spec (overrides inline flags)")
    y.add_argument("--preset", choices=["static-dynamic", "bursty"])
    y.add_argument("--seed", type=int, help="generator seed (default 0)")
    y.add_argument("--frames", type=int, default=100)
    y.add_argument("--width", type=int, default=64)
    y.add_argument("--height", type=int, default=64)
    y.add_argument("--focal", type=float, default=100.0)
    y.add_argument("--plane-depth", type=float, default=2.0)
    y.add_argument("--texture", choices=[t.value for t in Texture], default=Texture.GRADIENT_NOISE.value)
    y.add_argument("--segment", action="append", default=[],
                   metavar="N[:vx,vy,vz[:wx,wy,wz[:fx,fy]]]", help="motion segment, repeatable")
    y.set_defaults(func=cmd_synth)

    t = sub.add_parser("trace", parents=[common], help="extract per-frame columns from a report")
    t.add_argument("--input", required=True, help="report JSON")
    t.add_argument("--output", required=True, help="CSV path")
    t.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO
                                                if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
