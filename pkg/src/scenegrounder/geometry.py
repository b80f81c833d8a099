"""Pinhole camera types and the back-projection / projection math.

Conventions used everywhere in this package:

* pixel ``(u, v)`` is ``(column, row)``; image arrays are indexed ``[v, u]``;
* ``Pose`` is camera-to-world: ``X_world = R @ X_cam + t``;
* camera frame is the usual CV one (x right, y down, z forward), so a point
  with camera z <= 0 is behind the image plane;
* depth maps are metric, with 0 marking invalid pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyProjectionError

ORTHONORMALITY_TOL = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics. Focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err >= ORTHONORMALITY_TOL:
            raise ValueError(f"rotation is not orthonormal (max |R^T R - I| = {err:.2e})")
        if np.linalg.det(R) <= 0:
            raise ValueError("rotation has negative determinant (reflection)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_flat(cls, values) -> "Pose":
        """Build from 12 floats, row-major [R|t]."""
        m = np.asarray(values, dtype=np.float64).reshape(3, 4)
        return cls(m[:, :3], m[:, 3])

    def to_flat(self) -> list[float]:
        m = np.hstack([self.rotation, self.translation.reshape(3, 1)])
        return [float(x) for x in m.reshape(-1)]

    @property
    def camera_position(self) -> np.ndarray:
        return self.translation


@dataclass
class Frame:
    """One posed RGB-D observation.

    ``depth`` is an (H, W) float array in meters with 0 marking invalid
    pixels; ``rgb`` is an optional (H, W, 3) uint8 array.
    """

    index: int
    depth: np.ndarray
    pose: Pose
    intrinsics: CameraIntrinsics
    rgb: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.shape != (self.intrinsics.height, self.intrinsics.width):
            raise ValueError(
                f"depth shape {d.shape} does not match intrinsics "
                f"{self.intrinsics.height}x{self.intrinsics.width}"
            )
        if not np.isfinite(d).all() or (d < 0).any():
            raise ValueError(f"frame {self.index}: depth must be finite and >= 0")
        self.depth = d


def project_mask_to_points(frame: Frame, mask: np.ndarray, subsample_stride: int = 1) -> np.ndarray:
    """Back-project the valid-depth pixels of ``mask`` into world coordinates.

    Each selected pixel (u, v) with depth z yields
    ``X = R @ (z * K^-1 @ [u, v, 1]) + t``. Pixels with zero depth are
    skipped; ``subsample_stride`` keeps every stride-th row and column.
    Returns an (N, 3) float64 array in row-major pixel order.

    Raises EmptyProjectionError when no selected pixel has valid depth.
    """
    if subsample_stride < 1:
        raise ValueError("subsample_stride must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != frame.depth.shape:
        raise ValueError(f"mask shape {mask.shape} != depth shape {frame.depth.shape}")

    sub = np.zeros_like(mask)
    sub[::subsample_stride, ::subsample_stride] = mask[::subsample_stride, ::subsample_stride]
    vs, us = np.nonzero(sub)
    z = frame.depth[vs, us]
    valid = z > 0
    if not valid.any():
        raise EmptyProjectionError(f"frame {frame.index}: mask has no pixel with valid depth")
    us, vs, z = us[valid], vs[valid], z[valid]

    K = frame.intrinsics
    x = (us - K.cx) / K.fx * z
    y = (vs - K.cy) / K.fy * z
    pts_cam = np.stack([x, y, z], axis=1)
    return pts_cam @ frame.pose.rotation.T + frame.pose.translation


def project_points_to_pixels(points: np.ndarray, pose: Pose, intrinsics: CameraIntrinsics):
    """Project world points through a pinhole camera.

    Returns ``(uv, z)`` where ``uv`` is (N, 2) float64 pixel coordinates and
    ``z`` the camera-frame depth. No bounds or sign filtering is applied;
    callers decide what to do with z <= 0.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    pts_cam = (pts - pose.translation) @ pose.rotation
    z = pts_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * pts_cam[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * pts_cam[:, 1] / z + intrinsics.cy
    return np.stack([u, v], axis=1), z


def aabb_of_points(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned bounding box as (min_corner, max_corner), float64."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ValueError("cannot bound an empty point set")
    return pts.min(axis=0), pts.max(axis=0)


def aabbs_intersect(min_a, max_a, min_b, max_b, inflate: float = 0.0) -> bool:
    """Interval-overlap test on every axis, with box A inflated by ``inflate``."""
    min_a = np.asarray(min_a) - inflate
    max_a = np.asarray(max_a) + inflate
    return bool(np.all(min_a <= max_b) and np.all(np.asarray(min_b) <= max_a))


def look_at_pose(eye, target, world_up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera-to-world pose with the optical axis aimed at ``target``.

    Camera z points from eye to target; camera x is chosen perpendicular to
    ``world_up`` so the image is level (y then completes the right-handed
    frame and points "down" in world terms).
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n == 0:
        raise ValueError("eye and target coincide")
    fwd = fwd / n
    up = np.asarray(world_up, dtype=np.float64)
    right = np.cross(fwd, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        # looking straight along world_up; pick an arbitrary level axis
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        rn = np.linalg.norm(right)
    right = right / rn
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd], axis=1)
    return Pose(R, eye)
