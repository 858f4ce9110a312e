import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from adaptkf.core import Intrinsics, Pose
from adaptkf.dataio import (
    DatasetError,
    MotionSegment,
    SyntheticSpec,
    Texture,
    _texture_fn,
    associate,
    generate_synthetic,
    integrate_poses,
    load_sequence,
    quaternion_to_rotation,
    read_trajectory,
    write_intrinsics,
    write_sequence,
)

from conftest import make_frame
from oracles import axis_angle_matrix, exhaustive_association


def _write_minimal(root, rgb_ts=(1.0,), depth_ts=(1.002,), pose_ts=(1.001,), size=(4, 5)):
    h, w = size
    (root / "rgb").mkdir()
    (root / "depth").mkdir()
    rgb_lines, depth_lines, gt_lines = [], [], []
    for i, t in enumerate(rgb_ts):
        Image.fromarray(np.full((h, w, 3), 10 * i, np.uint8)).save(root / "rgb" / f"{i}.png")
        rgb_lines.append(f"{t} rgb/{i}.png")
    for i, t in enumerate(depth_ts):
        Image.fromarray(np.full((h, w), 10000, np.uint16)).save(root / "depth" / f"{i}.png")
        depth_lines.append(f"{t} depth/{i}.png")
    for t in pose_ts:
        gt_lines.append(f"{t} 0 0 0 0 0 0 1")
    (root / "rgb.txt").write_text("# rgb\n" + "\n".join(rgb_lines) + "\n")
    (root / "depth.txt").write_text("\n".join(depth_lines) + "\n")
    (root / "groundtruth.txt").write_text("# gt\n" + "\n".join(gt_lines) + ("\n" if gt_lines else ""))
    write_intrinsics(root / "intrinsics.json", Intrinsics(50.0, 50.0, w / 2, h / 2, w, h))


def test_association_single_frame(tmp_path):
    _write_minimal(tmp_path)
    frames = load_sequence(tmp_path)
    assert len(frames) == 1
    f = frames[0]
    assert f.timestamp == 1.0 and f.index == 0
    np.testing.assert_array_equal(f.depth, 2.0)  # 10000 / 5000
    assert f.pose == Pose.identity()


def test_out_of_tolerance_frame_dropped(tmp_path, caplog):
    _write_minimal(tmp_path, rgb_ts=(1.0, 2.0), depth_ts=(1.5, 2.001), pose_ts=(1.0, 2.0))
    with caplog.at_level(logging.INFO, logger="adaptkf.dataio"):
        frames = load_sequence(tmp_path)
    assert [f.timestamp for f in frames] == [2.0]
    assert "dropped 1" in caplog.text


def test_empty_trajectory_rejected(tmp_path):
    _write_minimal(tmp_path, pose_ts=())
    with pytest.raises(DatasetError, match="zero associated frames"):
        load_sequence(tmp_path)


@pytest.mark.parametrize("name", ["groundtruth.txt", "rgb.txt", "depth.txt", "intrinsics.json"])
def test_missing_file_named(tmp_path, name):
    _write_minimal(tmp_path)
    (tmp_path / name).unlink()
    with pytest.raises(DatasetError, match=f"missing file: .*{name}"):
        load_sequence(tmp_path)


def test_missing_image_named(tmp_path):
    _write_minimal(tmp_path)
    (tmp_path / "depth" / "0.png").unlink()
    with pytest.raises(DatasetError, match="0.png"):
        load_sequence(tmp_path)


@pytest.mark.parametrize("line,match", [
    ("1.0 0 0 0 0 0 1", "expected 8 fields"),
    ("1.0 0 0 x 0 0 0 1", "non-numeric"),
])
def test_malformed_trajectory_reports_line(tmp_path, line, match):
    p = tmp_path / "groundtruth.txt"
    p.write_text("# header\n0.5 0 0 0 0 0 0 1\n" + line + "\n")
    with pytest.raises(DatasetError, match=f":3: {match}"):
        read_trajectory(p)


def test_associate_examples():
    assert associate([1.0], [1.002], 0.02) == {0: 0}
    assert associate([1.0], [1.5], 0.02) == {}
    # each entry used once: the closer pair wins, the other rgb finds the next best
    assert associate([1.0, 1.01], [1.009, 1.015], 0.02) == {1: 0, 0: 1}


@given(st.lists(st.integers(0, 200), max_size=12), st.lists(st.integers(0, 200), max_size=12),
       st.integers(0, 30))
def test_associate_matches_exhaustive_oracle(a, b, dt):
    # millisecond-grid timestamps make exact ties common
    a = [x / 1000 for x in a]
    b = [x / 1000 for x in b]
    assert associate(a, b, dt / 1000) == exhaustive_association(a, b, dt / 1000)


@given(st.lists(st.integers(0, 300), min_size=1, max_size=10, unique=True),
       st.lists(st.integers(0, 300), min_size=1, max_size=10, unique=True), st.randoms())
def test_association_stable_under_permutation(a, b, rnd):
    a = [x / 100 for x in a]
    b = [x / 100 for x in b]
    pa, pb = a[:], b[:]
    rnd.shuffle(pa)
    rnd.shuffle(pb)
    pairs = {(a[i], b[j]) for i, j in associate(a, b, 0.05).items()}
    ppairs = {(pa[i], pb[j]) for i, j in associate(pa, pb, 0.05).items()}
    assert pairs == ppairs


def test_quaternion_orders_agree():
    rng = np.random.default_rng(5)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    R = quaternion_to_rotation(q, "xyzw")
    np.testing.assert_allclose(quaternion_to_rotation(q[[3, 0, 1, 2]], "wxyz"), R, atol=1e-15)
    with pytest.raises(ValueError):
        quaternion_to_rotation(q, "zyxw")


def test_wxyz_sequence_loads(tmp_path):
    _write_minimal(tmp_path)
    # 90 degrees about z, stored w first
    s = np.sqrt(0.5)
    (tmp_path / "groundtruth.txt").write_text(f"1.001 0 0 0 {s} 0 0 {s}\n")
    f = load_sequence(tmp_path, quaternion_order="wxyz")[0]
    np.testing.assert_allclose(f.pose.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-12)
    # the same numbers read as xyzw are a rotation about x
    f = load_sequence(tmp_path, quaternion_order="xyzw")[0]
    np.testing.assert_allclose(f.pose.rotation, [[1, 0, 0], [0, 0, -1], [0, 1, 0]], atol=1e-12)


@pytest.mark.parametrize("texture", list(Texture))
def test_round_trip_through_tum_layout(tmp_path, texture):
    spec = SyntheticSpec(width=24, height=16, frame_count=6, texture=texture, seed=4,
                         motion=(MotionSegment(5, (0.01, -0.005, 0.02), (0.0, 0.01, 0.02)),))
    frames = generate_synthetic(spec)
    write_sequence(frames, tmp_path)
    back = load_sequence(tmp_path)
    assert len(back) == len(frames)
    for a, b in zip(frames, back):
        assert np.abs(a.rgb - b.rgb).max() <= 1 / 255
        # depth is exact up to the 1/5000 m quantum of 16-bit storage
        assert np.abs(a.depth - b.depth).max() <= 0.5 / 5000 + 1e-12
        np.testing.assert_allclose(b.pose.matrix(), a.pose.matrix(), atol=1e-12)
        assert b.intrinsics == a.intrinsics


def test_round_trip_depth_exact_on_grid(tmp_path, rng):
    depth = rng.integers(1, 60000, size=(6, 7)) / 5000.0
    depth[0, 0] = 0.0
    f = make_frame(rng.random((6, 7, 3)), depth)
    write_sequence([f], tmp_path)
    back = load_sequence(tmp_path)[0]
    np.testing.assert_array_equal(back.depth, depth)


def test_zero_velocity_frames_identical():
    frames = generate_synthetic(SyntheticSpec(width=20, height=12, frame_count=10, seed=9))
    for f in frames[1:]:
        assert np.array_equal(f.rgb, frames[0].rgb) and np.array_equal(f.depth, frames[0].depth)
        assert f.pose == frames[0].pose


@pytest.mark.parametrize("texture", list(Texture))
def test_x_translation_shifts_image_by_fx_v_over_z(texture):
    fx, Z, v = 100.0, 2.0, 0.04
    shift = int(round(fx * v / Z))
    assert shift == 2
    spec = SyntheticSpec(width=40, height=20, frame_count=4, focal=fx, plane_depth=Z, texture=texture, seed=2,
                         motion=(MotionSegment(3, (v, 0.0, 0.0)),))
    frames = generate_synthetic(spec)
    for i, f in enumerate(frames):
        s = i * shift
        # camera moving +x sees content move towards -u
        np.testing.assert_allclose(f.rgb[:, : 40 - s], frames[0].rgb[:, s:], atol=1e-9)
        np.testing.assert_array_equal(f.depth, Z)


def test_generator_is_deterministic():
    spec = SyntheticSpec(width=16, height=16, frame_count=5, seed=11,
                         motion=(MotionSegment(4, (0.01, 0, 0), (0, 0.02, 0), (0.01, 0.0)),))
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    for x, y in zip(a, b):
        assert x.rgb.tobytes() == y.rgb.tobytes() and x.depth.tobytes() == y.depth.tobytes()
    other = generate_synthetic(SyntheticSpec(width=16, height=16, frame_count=5, seed=12))
    assert not np.array_equal(a[0].rgb, other[0].rgb)


def test_two_segment_pose_integration_matches_oracle():
    segs = (MotionSegment(3, (0.01, 0.0, 0.002), (0.0, 0.02, 0.0)),
            MotionSegment(4, (-0.005, 0.003, 0.0), (0.01, 0.0, -0.03)))
    poses = integrate_poses(SyntheticSpec(frame_count=10, motion=segs))
    R = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    t = [0.0, 0.0, 0.0]
    steps = [segs[0]] * 3 + [segs[1]] * 4
    expected = [(R, t)]
    for i in range(1, 10):
        if i - 1 < len(steps):
            step = steps[i - 1]
            t = [t[k] + step.velocity[k] for k in range(3)]
            dR = axis_angle_matrix(step.angular)
            R = [[sum(R[r][k] * dR[k][c] for k in range(3)) for c in range(3)] for r in range(3)]
        expected.append((R, t))
    for pose, (R, t) in zip(poses, expected):
        np.testing.assert_allclose(pose.rotation, R, atol=1e-9, rtol=0)
        np.testing.assert_allclose(pose.translation, t, atol=1e-9, rtol=0)


def test_spec_validation_and_dict_round_trip():
    with pytest.raises(ValueError):
        SyntheticSpec(frame_count=0)
    with pytest.raises(ValueError):
        SyntheticSpec(plane_depth=0.0)
    spec = SyntheticSpec(texture="checkerboard", motion=(MotionSegment(2, (0.1, 0, 0)),), seed=3)
    assert SyntheticSpec.from_dict(spec.to_dict()) == spec


def test_rotated_view_renders_plane():
    spec = SyntheticSpec(width=16, height=12, frame_count=3, motion=(MotionSegment(2, angular=(0.0, 0.05, 0.0)),))
    frames = generate_synthetic(spec)
    f = frames[2]
    assert f.valid_depth.all()
    # a plane tilted away from the optical axis: depth varies along u only
    assert np.allclose(f.depth, f.depth[:1, :])
    assert not np.allclose(f.depth[:, 0], f.depth[:, -1])


def test_separable_texture_path_matches_general_path():
    spec = SyntheticSpec(width=20, height=14, seed=6)
    tex = _texture_fn(spec)
    xs = np.linspace(-0.3, 0.4, 20)
    ys = np.linspace(-0.2, 0.25, 14)
    X, Y = np.meshgrid(xs, ys)
    np.testing.assert_allclose(tex(xs[None, :], ys[:, None]), tex(X, Y), atol=1e-12)
