"""Best-view selection: viewpoint clustering plus raycast-area maximization.

Raycasting all observation poses of every object is the expensive part of
node generation, so camera positions are first clustered and only one
representative pose per cluster is rendered. The view with the largest
projected mask area wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .errors import EmptyMaskError, NoVisibleViewError
from .geometry import CameraIntrinsics, Frame, Pose, project_points_to_pixels
from .objectmap import MapObject

DEFAULT_NUM_VIEWS = 5
DEFAULT_SPLAT_RADIUS_PX = 2
DEFAULT_OCCLUSION_TOL = 0.05  # meters
DEFAULT_CROP_PAD_PX = 10
KMEANS_SEED = 0
KMEANS_MAX_ITER = 50


@dataclass
class ViewCandidate:
    frame_index: int
    camera_position: np.ndarray
    pose: Pose


@dataclass
class BestView:
    frame_index: int
    mask: np.ndarray
    crop_box: tuple[int, int, int, int]  # (x0, y0, x1, y1), half-open
    area_px: int


def cluster_viewpoints(positions: np.ndarray, num_clusters: int) -> list[int]:
    """Pick one representative index per viewpoint cluster.

    With at most ``num_clusters`` positions (or fewer distinct ones than
    clusters) every index is returned. Otherwise k-means (k-means++ init,
    fixed seed, 50 iterations) clusters the camera positions and the member
    nearest each centroid represents its cluster. Indices come back sorted.
    """
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    q = pts.shape[0]
    if q < 1:
        raise ValueError("need at least one viewpoint")
    if q <= num_clusters:
        return list(range(q))
    distinct = np.unique(pts, axis=0)
    if distinct.shape[0] <= num_clusters:
        # degenerate trajectories: one representative per distinct position
        reps = []
        for row in distinct:
            reps.append(int(np.nonzero((pts == row).all(axis=1))[0][0]))
        return sorted(reps)
    km = KMeans(
        n_clusters=num_clusters,
        init="k-means++",
        n_init=1,
        max_iter=KMEANS_MAX_ITER,
        random_state=KMEANS_SEED,
    ).fit(pts)
    reps = []
    for c in range(num_clusters):
        members = np.nonzero(km.labels_ == c)[0]
        if members.size == 0:
            continue
        d = np.linalg.norm(pts[members] - km.cluster_centers_[c], axis=1)
        reps.append(int(members[int(np.argmin(d))]))
    return sorted(reps)


def _splat_offsets(radius: int) -> np.ndarray:
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    keep = dy * dy + dx * dx <= r * r
    return np.stack([dy[keep], dx[keep]], axis=1)


def raycast_mask(
    object_points: np.ndarray,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    frame_depth: np.ndarray | None = None,
    splat_radius_px: int = DEFAULT_SPLAT_RADIUS_PX,
    occlusion_tol: float = DEFAULT_OCCLUSION_TOL,
) -> np.ndarray:
    """Render an object's point cloud into a boolean mask by splatting.

    World points behind the camera are skipped; each in-bounds projection
    marks a disk of ``splat_radius_px``. Pixel centers use floor(u + 0.5)
    rounding. With ``frame_depth`` given, a splatted pixel survives only if
    the point's depth is within ``occlusion_tol`` in front of the recorded
    depth (invalid recorded depth, i.e. <= 0, never occludes).

    Raises EmptyMaskError when nothing lands in-bounds.
    """
    uv, z = project_points_to_pixels(object_points, pose, intrinsics)
    front = z > 0
    u = np.floor(uv[front, 0] + 0.5).astype(np.int64)
    v = np.floor(uv[front, 1] + 0.5).astype(np.int64)
    z = z[front]
    h, w = intrinsics.height, intrinsics.width
    inb = (u >= 0) & (u < w) & (v >= 0) & (v < h)
    u, v, z = u[inb], v[inb], z[inb]
    if u.size == 0:
        raise EmptyMaskError("no object point projects inside the image")
    mask = np.zeros((h, w), dtype=bool)
    for dy, dx in _splat_offsets(splat_radius_px):
        uu, vv = u + dx, v + dy
        ok = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
        if frame_depth is not None:
            rec = frame_depth[vv[ok], uu[ok]]
            visible = (rec <= 0) | (z[ok] <= rec + occlusion_tol)
            mask[vv[ok][visible], uu[ok][visible]] = True
        else:
            mask[vv[ok], uu[ok]] = True
    if not mask.any():
        raise EmptyMaskError("all projected pixels failed the occlusion test")
    return mask


def crop_box_of_mask(mask: np.ndarray, pad_px: int = DEFAULT_CROP_PAD_PX) -> tuple[int, int, int, int]:
    """Tight half-open (x0, y0, x1, y1) around the mask, padded and clamped."""
    vs, us = np.nonzero(mask)
    h, w = mask.shape
    return (
        max(int(us.min()) - pad_px, 0),
        max(int(vs.min()) - pad_px, 0),
        min(int(us.max()) + 1 + pad_px, w),
        min(int(vs.max()) + 1 + pad_px, h),
    )


def best_view(
    obj: MapObject,
    frames: dict[int, Frame],
    num_views: int = DEFAULT_NUM_VIEWS,
    splat_radius_px: int = DEFAULT_SPLAT_RADIUS_PX,
    occlusion_tol: float = DEFAULT_OCCLUSION_TOL,
    crop_pad_px: int = DEFAULT_CROP_PAD_PX,
    use_depth_occlusion: bool = True,
) -> BestView:
    """Pick the observation frame with the largest projected mask area.

    Candidate poses are the clustered-viewpoint representatives of the
    object's observation frames, so at most ``num_views`` raycasts run per
    object. Ties break to the lowest frame index. Raises NoVisibleViewError
    when every candidate renders empty.
    """
    observed = [
        ViewCandidate(frame_index=fi, camera_position=frames[fi].pose.camera_position,
                      pose=frames[fi].pose)
        for fi in sorted(obj.frame_indices)
        if fi in frames
    ]
    if not observed:
        raise NoVisibleViewError(f"object {obj.id}: no observation frame available")
    positions = np.stack([c.camera_position for c in observed])
    reps = cluster_viewpoints(positions, num_views)
    candidates = [observed[r].frame_index for r in reps]

    best: BestView | None = None
    for fi in sorted(candidates):
        frame = frames[fi]
        try:
            mask = raycast_mask(
                obj.points,
                frame.pose,
                frame.intrinsics,
                frame.depth if use_depth_occlusion else None,
                splat_radius_px,
                occlusion_tol,
            )
        except EmptyMaskError:
            continue
        area = int(np.count_nonzero(mask))
        if best is None or area > best.area_px:
            best = BestView(
                frame_index=fi,
                mask=mask,
                crop_box=crop_box_of_mask(mask, crop_pad_px),
                area_px=area,
            )
    if best is None:
        raise NoVisibleViewError(f"object {obj.id}: every candidate view is empty")
    return best
