from __future__ import annotations

import numpy as np
import pytest

from scenegrounder.geometry import CameraIntrinsics, Frame, Pose


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_pose(rng, translation_scale: float = 2.0) -> Pose:
    return Pose(random_rotation(rng), rng.normal(scale=translation_scale, size=3))


def make_frame(
    index: int = 0,
    depth: np.ndarray | None = None,
    pose: Pose | None = None,
    fx: float = 100.0,
    fy: float = 100.0,
    cx: float | None = None,
    cy: float | None = None,
    width: int = 8,
    height: int = 8,
    rgb: np.ndarray | None = None,
) -> Frame:
    if depth is None:
        depth = np.zeros((height, width))
    else:
        height, width = depth.shape
    intr = CameraIntrinsics(
        fx=fx,
        fy=fy,
        cx=(width - 1) / 2 if cx is None else cx,
        cy=(height - 1) / 2 if cy is None else cy,
        width=width,
        height=height,
    )
    return Frame(index=index, depth=depth, pose=pose or Pose.identity(), intrinsics=intr, rgb=rgb)
