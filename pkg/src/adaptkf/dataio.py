"""TUM-layout RGB-D sequence I/O and a seeded synthetic sequence generator."""

from __future__ import annotations

import bisect
import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
from PIL import Image
from scipy.spatial.transform import Rotation

from .core import ConfigError, Frame, Intrinsics, Pose

log = logging.getLogger(__name__)

DEFAULT_DEPTH_SCALE = 5000.0
INTRINSICS_FILE = "intrinsics.json"


class DatasetError(ValueError):
    pass


@dataclass
class SequenceManifest:
    rgb: list[tuple[float, str]]
    depth: list[tuple[float, str]]
    trajectory: list[tuple[float, np.ndarray, np.ndarray]]  # (t, xyz, quaternion as stored)
    intrinsics: Intrinsics
    depth_scale: float = DEFAULT_DEPTH_SCALE

    def __post_init__(self):
        if not self.depth_scale > 0:
            raise DatasetError("depth_scale must be > 0")
        self.rgb.sort(key=lambda e: e[0])
        self.depth.sort(key=lambda e: e[0])
        self.trajectory.sort(key=lambda e: e[0])


def _read_lines(path: Path) -> Iterator[tuple[int, list[str]]]:
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def read_file_list(path) -> list[tuple[float, str]]:
    path = Path(path)
    out = []
    for lineno, parts in _read_lines(path):
        if len(parts) < 2:
            raise DatasetError(f"{path}:{lineno}: expected 'timestamp filename'")
        try:
            out.append((float(parts[0]), parts[1]))
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: bad timestamp {parts[0]!r}") from None
    return out


def read_trajectory(path) -> list[tuple[float, np.ndarray, np.ndarray]]:
    path = Path(path)
    out = []
    for lineno, parts in _read_lines(path):
        if len(parts) != 8:
            raise DatasetError(f"{path}:{lineno}: expected 8 fields 'timestamp tx ty tz q q q q', got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: non-numeric field") from None
        out.append((vals[0], np.array(vals[1:4]), np.array(vals[4:8])))
    return out


def read_intrinsics(path) -> tuple[Intrinsics, float]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        intr = Intrinsics(float(data["fx"]), float(data["fy"]), float(data["cx"]), float(data["cy"]),
                          int(data["width"]), int(data["height"]))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetError(f"{path}: malformed intrinsics ({exc})") from None
    return intr, float(data.get("depth_scale", DEFAULT_DEPTH_SCALE))


def write_intrinsics(path, intrinsics: Intrinsics, depth_scale: float = DEFAULT_DEPTH_SCALE) -> None:
    doc = {"fx": intrinsics.fx, "fy": intrinsics.fy, "cx": intrinsics.cx, "cy": intrinsics.cy,
           "width": intrinsics.width, "height": intrinsics.height, "depth_scale": depth_scale}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def associate(a: Sequence[float], b: Sequence[float], max_dt: float) -> dict[int, int]:
    """Greedy nearest-neighbour matching of two timestamp lists.

    Candidate pairs within ``max_dt`` are taken in order of increasing time
    difference; each entry is used at most once. Returns {index_in_a: index_in_b}.
    """
    order_b = sorted(range(len(b)), key=lambda j: b[j])
    sorted_b = [b[j] for j in order_b]
    candidates = []
    for i, ta in enumerate(a):
        lo = bisect.bisect_left(sorted_b, ta - max_dt)
        hi = bisect.bisect_right(sorted_b, ta + max_dt)
        for pos in range(lo, hi):
            j = order_b[pos]
            d = abs(ta - b[j])
            if d <= max_dt:  # the bisect window can admit a rounding-error overshoot
                candidates.append((d, ta, b[j], i, j))
    candidates.sort()
    used_a, used_b, out = set(), set(), {}
    for _, _, _, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        out[i] = j
    return out


def quaternion_to_rotation(q, order: str = "xyzw") -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if order == "wxyz":
        q = q[[1, 2, 3, 0]]
    elif order != "xyzw":
        raise ValueError(f"quaternion order must be 'xyzw' or 'wxyz', got {order!r}")
    return Rotation.from_quat(q).as_matrix()


def read_manifest(root, intrinsics: Optional[Intrinsics] = None,
                  depth_scale: Optional[float] = None) -> SequenceManifest:
    root = Path(root)
    if intrinsics is None:
        intrinsics, file_scale = read_intrinsics(root / INTRINSICS_FILE)
        depth_scale = depth_scale if depth_scale is not None else file_scale
    return SequenceManifest(
        rgb=read_file_list(root / "rgb.txt"),
        depth=read_file_list(root / "depth.txt"),
        trajectory=read_trajectory(root / "groundtruth.txt"),
        intrinsics=intrinsics,
        depth_scale=depth_scale if depth_scale is not None else DEFAULT_DEPTH_SCALE,
    )


def _load_rgb(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def _load_depth(path: Path, scale: float) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.float64) / scale


def iter_sequence(root, max_time_delta: float = 0.02, quaternion_order: str = "xyzw",
                  intrinsics: Optional[Intrinsics] = None) -> Iterator[Frame]:
    """Associate a TUM-layout sequence and decode frames lazily, one at a time."""
    root = Path(root)
    man = read_manifest(root, intrinsics)
    rgb_ts = [t for t, _ in man.rgb]
    to_depth = associate(rgb_ts, [t for t, _ in man.depth], max_time_delta)
    to_pose = associate(rgb_ts, [t for t, _, _ in man.trajectory], max_time_delta)
    keep = [i for i in range(len(man.rgb)) if i in to_depth and i in to_pose]
    dropped = len(man.rgb) - len(keep)
    if dropped:
        log.info("dropped %d of %d rgb entries without depth/pose within %.4fs", dropped, len(man.rgb), max_time_delta)
    if not keep:
        raise DatasetError(f"{root}: zero associated frames")
    for index, i in enumerate(keep):
        ts, rgb_rel = man.rgb[i]
        _, depth_rel = man.depth[to_depth[i]]
        _, xyz, quat = man.trajectory[to_pose[i]]
        pose = Pose(quaternion_to_rotation(quat, quaternion_order), xyz)
        yield Frame(index, ts, _load_rgb(root / rgb_rel), _load_depth(root / depth_rel, man.depth_scale),
                    pose, man.intrinsics)


def load_sequence(root, max_time_delta: float = 0.02, quaternion_order: str = "xyzw",
                  intrinsics: Optional[Intrinsics] = None) -> list[Frame]:
    return list(iter_sequence(root, max_time_delta, quaternion_order, intrinsics))


def write_sequence(frames: Sequence[Frame], root, depth_scale: float = DEFAULT_DEPTH_SCALE) -> Path:
    """Write frames in TUM layout: rgb/, depth/, list files, groundtruth and intrinsics."""
    root = Path(root)
    (root / "rgb").mkdir(parents=True, exist_ok=True)
    (root / "depth").mkdir(parents=True, exist_ok=True)
    rgb_lines = ["# color images", "# timestamp filename"]
    depth_lines = ["# depth maps", "# timestamp filename"]
    gt_lines = ["# ground truth trajectory", "# timestamp tx ty tz qx qy qz qw"]
    max_raw = np.iinfo(np.uint16).max
    for f in frames:
        name = f"{f.timestamp:.6f}.png"
        rgb8 = np.round(f.rgb * 255.0).astype(np.uint8)
        Image.fromarray(rgb8, mode="RGB").save(root / "rgb" / name)
        raw = np.where(f.valid_depth, np.round(np.nan_to_num(f.depth) * depth_scale), 0)
        raw[raw > max_raw] = 0
        Image.fromarray(raw.astype(np.uint16)).save(root / "depth" / name)
        rgb_lines.append(f"{f.timestamp:.6f} rgb/{name}")
        depth_lines.append(f"{f.timestamp:.6f} depth/{name}")
        q = Rotation.from_matrix(f.pose.rotation).as_quat()
        vals = " ".join(repr(float(x)) for x in (*f.pose.translation, *q))
        gt_lines.append(f"{f.timestamp:.6f} {vals}")
    for fname, lines in (("rgb.txt", rgb_lines), ("depth.txt", depth_lines), ("groundtruth.txt", gt_lines)):
        (root / fname).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if frames:
        write_intrinsics(root / INTRINSICS_FILE, frames[0].intrinsics, depth_scale)
    return root


# --- synthetic sequences ---------------------------------------------------

class Texture(str, enum.Enum):
    CHECKERBOARD = "checkerboard"
    GRADIENT_NOISE = "gradient_noise"


@dataclass(frozen=True)
class MotionSegment:
    frames: int
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)   # world-frame, m/frame
    angular: tuple[float, float, float] = (0.0, 0.0, 0.0)    # body-frame rotation vector, rad/frame
    scene_flow: tuple[float, float] = (0.0, 0.0)             # texture drift along the plane, m/frame


@dataclass(frozen=True)
class SyntheticSpec:
    width: int = 64
    height: int = 64
    frame_count: int = 100
    texture: Texture = Texture.GRADIENT_NOISE
    plane_depth: float = 2.0
    motion: tuple[MotionSegment, ...] = ()
    seed: int = 0
    focal: float = 100.0
    fps: float = 30.0
    texture_scale: Optional[float] = None  # meters per texture cell; default 4 px at plane depth

    def __post_init__(self):
        if self.frame_count < 1:
            raise ConfigError("synthetic: frame_count must be >= 1")
        if not self.plane_depth > 0:
            raise ConfigError("synthetic: plane_depth must be > 0")
        if any(s.frames < 0 for s in self.motion):
            raise ConfigError("synthetic: segment frame spans must be >= 0")
        object.__setattr__(self, "texture", Texture(self.texture))
        object.__setattr__(self, "motion", tuple(
            s if isinstance(s, MotionSegment) else MotionSegment(**s) for s in self.motion))

    @property
    def intrinsics(self) -> Intrinsics:
        return Intrinsics(self.focal, self.focal, self.width / 2.0, self.height / 2.0, self.width, self.height)

    @property
    def cell(self) -> float:
        return self.texture_scale if self.texture_scale else 4.0 * self.plane_depth / self.focal

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height, "frame_count": self.frame_count,
            "texture": self.texture.value, "plane_depth": self.plane_depth,
            "motion": [{"frames": s.frames, "velocity": list(s.velocity), "angular": list(s.angular),
                        "scene_flow": list(s.scene_flow)} for s in self.motion],
            "seed": self.seed, "focal": self.focal, "fps": self.fps, "texture_scale": self.texture_scale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        data = dict(data)
        data["motion"] = tuple(MotionSegment(int(s["frames"]), tuple(s.get("velocity", (0, 0, 0))),
                                             tuple(s.get("angular", (0, 0, 0))),
                                             tuple(s.get("scene_flow", (0, 0))))
                               for s in data.get("motion", ()))
        return cls(**data)


def _steps(spec: SyntheticSpec) -> list[MotionSegment]:
    steps = []
    for seg in spec.motion:
        steps.extend([seg] * seg.frames)
    return steps


def integrate_poses(spec: SyntheticSpec) -> list[Pose]:
    """Camera poses for every frame; frame 0 is the world origin.

    Frame i (i >= 1) advances by the step of the segment covering step i,
    where segment spans are consumed in order; steps past the last segment
    hold still. Translation is integrated in the world frame, rotation in
    the body frame.
    """
    steps = _steps(spec)
    R = np.eye(3)
    t = np.zeros(3)
    poses = [Pose(R, t)]
    for i in range(1, spec.frame_count):
        if i - 1 < len(steps):
            seg = steps[i - 1]
            t = t + np.asarray(seg.velocity, dtype=np.float64)
            R = R @ Rotation.from_rotvec(seg.angular).as_matrix()
        poses.append(Pose(R, t))
    return poses


def integrate_scene_flow(spec: SyntheticSpec) -> np.ndarray:
    """Accumulated texture offset on the plane for every frame, shape (n, 2)."""
    steps = _steps(spec)
    out = np.zeros((spec.frame_count, 2))
    for i in range(1, spec.frame_count):
        step = steps[i - 1].scene_flow if i - 1 < len(steps) else (0.0, 0.0)
        out[i] = out[i - 1] + np.asarray(step, dtype=np.float64)
    return out


def _texture_fn(spec: SyntheticSpec):
    rng = np.random.default_rng(spec.seed)
    cell = spec.cell
    if spec.texture is Texture.CHECKERBOARD:
        colors = rng.uniform(0.1, 0.9, size=(2, 3))
        # seeded phase keeps cell edges off the pixel-center lattice
        ox, oy = rng.uniform(0.1, 0.9, size=2)

        def checker(x, y):
            parity = (np.floor(x / cell + ox) + np.floor(y / cell + oy)).astype(np.int64) % 2
            return colors[parity]
        return checker

    n = 8
    # wavelengths between 2 and 6 cells, random orientation and phase per channel
    freq = 2 * np.pi / (cell * rng.uniform(2.0, 6.0, size=(3 * n, 1)))
    theta = rng.uniform(0, 2 * np.pi, size=(3 * n, 1))
    kx, ky = freq * np.cos(theta), freq * np.sin(theta)
    phase = rng.uniform(0, 2 * np.pi, size=(3 * n, 1))
    amp = rng.uniform(0.5, 1.0, size=(3, n))
    weights = amp / amp.sum(axis=1, keepdims=True)

    def noise(x, y):
        if x.ndim == 2 and x.shape[0] == 1 and y.shape[-1] == 1:
            # separable grid: sin(a + b) = sin a cos b + cos a sin b
            a = (kx * x.ravel() + phase).reshape(3, n, -1)
            b = (ky * y.ravel()).reshape(3, n, -1)
            val = (np.einsum("cn,cnh,cnw->hwc", weights, np.cos(b), np.sin(a))
                   + np.einsum("cn,cnh,cnw->hwc", weights, np.sin(b), np.cos(a)))
            return 0.5 + 0.5 * val
        waves = np.sin(kx * x.ravel() + ky * y.ravel() + phase).reshape(3, n, -1)
        val = np.einsum("cn,cnp->pc", weights, waves)
        return (0.5 + 0.5 * val).reshape(x.shape + (3,))
    return noise


def render_plane(spec: SyntheticSpec, pose: Pose, texture=None, offset=(0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """Ray-cast the textured plane z_world = plane_depth from ``pose``.

    ``offset`` shifts the texture along the plane, modelling scene content
    that moves independently of the camera.
    """
    texture = texture or _texture_fn(spec)
    intr = spec.intrinsics
    if np.array_equal(pose.rotation, np.eye(3)):
        # unrotated view of a fronto-parallel plane: world x depends on u only, y on v only
        dist = spec.plane_depth - pose.translation[2]
        shape = (spec.height, spec.width)
        if not dist > 0:
            return np.zeros(shape + (3,)), np.zeros(shape)
        xs = pose.translation[0] + dist * (np.arange(spec.width) - intr.cx) / intr.fx
        ys = pose.translation[1] + dist * (np.arange(spec.height) - intr.cy) / intr.fy
        rgb = texture(xs[None, :] - offset[0], ys[:, None] - offset[1])
        return np.clip(np.broadcast_to(rgb, shape + (3,)), 0.0, 1.0), np.full(shape, dist)
    v, u = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    rays = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones_like(u)], axis=-1)
    d_world = rays @ pose.rotation.T
    origin = pose.translation
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (spec.plane_depth - origin[2]) / d_world[..., 2]
    hit = np.isfinite(s) & (s > 0)
    s = np.where(hit, s, 0.0)
    x = origin[0] + s * d_world[..., 0]
    y = origin[1] + s * d_world[..., 1]
    rgb = np.where(hit[..., None], texture(x - offset[0], y - offset[1]), 0.0)
    # camera-frame z of the hit point equals s because rays have unit z
    return np.clip(rgb, 0.0, 1.0), s


def generate_synthetic(spec: SyntheticSpec) -> list[Frame]:
    texture = _texture_fn(spec)
    intr = spec.intrinsics
    frames = []
    offsets = integrate_scene_flow(spec)
    for i, pose in enumerate(integrate_poses(spec)):
        rgb, depth = render_plane(spec, pose, texture, offsets[i])
        frames.append(Frame(i, i / spec.fps, rgb, depth, pose, intr))
    return frames


def static_dynamic_spec(seed: int = 0, static: int = 50, dynamic: int = 50,
                        velocity=(0.004, 0.002, 0.0), angular=(0.0, 0.0, 0.0), scene_flow=(0.03, 0.01),
                        texture: Texture = Texture.GRADIENT_NOISE, **kw) -> SyntheticSpec:
    """Still camera over a still scene for ``static`` frames, then ``dynamic`` frames of
    slow camera translation while the scene content drifts at roughly walking speed."""
    return SyntheticSpec(frame_count=static + dynamic, texture=texture, seed=seed,
                         motion=(MotionSegment(static - 1),
                                 MotionSegment(dynamic, tuple(velocity), tuple(angular), tuple(scene_flow))),
                         **kw)


BURSTY_SPEEDS = (0.0, 0.002, 0.006)


def bursty_spec(seed: int, frame_count: int = 100, speeds=BURSTY_SPEEDS, **kw) -> SyntheticSpec:
    """Seeded sequence of 10-29 frame segments, each with its own scene-flow speed
    (drawn from ``speeds``, m/frame, random direction) and a small camera drift."""
    rng = np.random.default_rng(seed)
    segments = []
    left = frame_count - 1
    while left > 0:
        span = int(min(left, rng.integers(10, 30)))
        speed = float(rng.choice(speeds))
        heading = rng.uniform(0.0, 2 * np.pi)
        drift = rng.uniform(-0.004, 0.004, size=2)
        segments.append(MotionSegment(span, (float(drift[0]), float(drift[1]), 0.0), (0.0, 0.0, 0.0),
                                      (speed * np.cos(heading), speed * np.sin(heading))))
        left -= span
    return SyntheticSpec(frame_count=frame_count, seed=seed, motion=tuple(segments), **kw)
