"""Depth-based forward warping of a keyframe into another camera view."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Frame, Intrinsics, Pose


@dataclass(frozen=True, eq=False)
class WarpResult:
    warped: np.ndarray   # HxWx3, zero where mask is False
    mask: np.ndarray     # HxW bool
    zbuffer: np.ndarray  # HxW, +inf where mask is False


def relative_pose(source: Pose, target: Pose) -> np.ndarray:
    """4x4 transform taking source-camera points into the target camera."""
    return np.linalg.inv(target.matrix()) @ source.matrix()


def warp_frame(keyframe: Frame, target_pose: Pose, target_intrinsics: Intrinsics) -> WarpResult:
    """Splat every valid-depth keyframe pixel into the target view.

    Each source pixel lands on the nearest integer target pixel. When several
    land on the same pixel the smallest depth wins, ties going to the smaller
    source linear index, so the output does not depend on evaluation order.
    """
    if keyframe.intrinsics.shape != target_intrinsics.shape:
        raise ConfigError(
            f"warp: keyframe shape {keyframe.intrinsics.shape} != target shape {target_intrinsics.shape}")
    h, w = target_intrinsics.shape
    src = keyframe.intrinsics

    valid = keyframe.valid_depth
    src_idx = np.flatnonzero(valid)
    vs, us = np.divmod(src_idx, w)
    z = keyframe.depth.ravel()[src_idx]
    pts = np.stack([(us - src.cx) / src.fx * z, (vs - src.cy) / src.fy * z, z])

    T = relative_pose(keyframe.pose, target_pose)
    cam = T[:3, :3] @ pts + T[:3, 3:4]
    zt = cam[2]
    front = zt > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = target_intrinsics.fx * cam[0] / zt + target_intrinsics.cx
        v = target_intrinsics.fy * cam[1] / zt + target_intrinsics.cy
    ui = np.floor(u[front] + 0.5)
    vi = np.floor(v[front] + 0.5)
    inside = (ui >= 0) & (ui < w) & (vi >= 0) & (vi < h)

    keep_src = src_idx[front][inside]
    keep_z = zt[front][inside]
    tgt = vi[inside].astype(np.int64) * w + ui[inside].astype(np.int64)

    order = np.lexsort((keep_src, keep_z, tgt))
    tgt_sorted = tgt[order]
    first = np.ones(tgt_sorted.shape, dtype=bool)
    first[1:] = tgt_sorted[1:] != tgt_sorted[:-1]
    winners = order[first]

    warped = np.zeros((h * w, 3))
    zbuffer = np.full(h * w, np.inf)
    mask = np.zeros(h * w, dtype=bool)
    dst = tgt[winners]
    warped[dst] = keyframe.rgb.reshape(-1, 3)[keep_src[winners]]
    zbuffer[dst] = keep_z[winners]
    mask[dst] = True
    return WarpResult(warped.reshape(h, w, 3), mask.reshape(h, w), zbuffer.reshape(h, w))


def mask_coverage(result: WarpResult) -> float:
    return float(np.count_nonzero(result.mask)) / result.mask.size
