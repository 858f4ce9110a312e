import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from adaptkf.core import Frame, Intrinsics, Pose  # noqa: E402


def make_frame(rgb, depth, pose=None, index=0, timestamp=0.0, intrinsics=None):
    rgb = np.asarray(rgb, dtype=np.float64)
    h, w = rgb.shape[:2]
    if intrinsics is None:
        intrinsics = Intrinsics(100.0, 100.0, w / 2.0, h / 2.0, w, h)
    return Frame(index, timestamp, rgb, np.asarray(depth, dtype=np.float64), pose or Pose.identity(), intrinsics)


def translated(x=0.0, y=0.0, z=0.0):
    return Pose(np.eye(3), [x, y, z])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def textured_frame(rng):
    h, w = 24, 32
    return make_frame(rng.random((h, w, 3)), np.full((h, w), 2.0))


settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
