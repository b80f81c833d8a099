"""Independent reference implementations used as test oracles.

Everything here is deliberately written with plain per-element arithmetic
(scalar loops, explicit formulas) and stays independent of the library code
paths it checks.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


def backproject_pixel(u, v, z, fx, fy, cx, cy, R, t):
    """Scalar back-projection of one pixel: X = R @ (z * K^-1 [u,v,1]) + t."""
    xc = z * (u - cx) / fx
    yc = z * (v - cy) / fy
    zc = z
    X = [
        R[0][0] * xc + R[0][1] * yc + R[0][2] * zc + t[0],
        R[1][0] * xc + R[1][1] * yc + R[1][2] * zc + t[1],
        R[2][0] * xc + R[2][1] * yc + R[2][2] * zc + t[2],
    ]
    return np.array(X)


def project_point(point, R, t, fx, fy, cx, cy):
    """Scalar pinhole projection; returns (u, v, z_cam)."""
    dx = point[0] - t[0]
    dy = point[1] - t[1]
    dz = point[2] - t[2]
    # camera coords: R^T (X - t)
    xc = R[0][0] * dx + R[1][0] * dy + R[2][0] * dz
    yc = R[0][1] * dx + R[1][1] * dy + R[2][1] * dz
    zc = R[0][2] * dx + R[1][2] * dy + R[2][2] * dz
    return fx * xc / zc + cx, fy * yc / zc + cy, zc


def reference_dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Classic O(N^2) DBSCAN with index-ordered seeding and full expansion.

    Labels match scikit-learn's: clusters are numbered in seed order and a
    border point belongs to the first cluster that reaches it.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    eps2 = eps * eps
    neighbors = []
    for i in range(n):
        d2 = ((pts - pts[i]) ** 2).sum(axis=1)
        neighbors.append(np.nonzero(d2 <= eps2)[0].tolist())
    core = [len(nb) >= min_pts for nb in neighbors]
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = deque(neighbors[i])
        while queue:
            j = queue.popleft()
            if labels[j] == -1:
                labels[j] = cluster
                if core[j]:
                    queue.extend(neighbors[j])
        cluster += 1
    return labels


def brute_force_overlap(points_a, points_b, radius) -> float:
    """Fraction of the smaller set with any neighbor in the other set."""
    a = np.asarray(points_a, dtype=np.float64)
    b = np.asarray(points_b, dtype=np.float64)
    small, other = (a, b) if len(a) <= len(b) else (b, a)
    hits = 0
    for p in small:
        best = min(math.dist(p, q) for q in other)
        if best <= radius:
            hits += 1
    return hits / len(small)


def raycast_mask_oracle(points, R, t, fx, fy, cx, cy, width, height,
                        splat_radius, depth=None, occlusion_tol=0.05):
    """Per-point splatting oracle mirroring the documented raycast rules.

    Pixel centers use floor(u + 0.5); splat disks are dx^2 + dy^2 <= r^2;
    with a depth map, a pixel survives when the recorded depth is invalid
    (<= 0) or the point is within occlusion_tol in front of it.
    """
    mask = np.zeros((height, width), dtype=bool)
    offsets = [
        (dy, dx)
        for dy in range(-splat_radius, splat_radius + 1)
        for dx in range(-splat_radius, splat_radius + 1)
        if dy * dy + dx * dx <= splat_radius * splat_radius
    ]
    for p in points:
        u, v, z = project_point(p, R, t, fx, fy, cx, cy)
        if z <= 0:
            continue
        ui = math.floor(u + 0.5)
        vi = math.floor(v + 0.5)
        if not (0 <= ui < width and 0 <= vi < height):
            continue
        for dy, dx in offsets:
            uu, vv = ui + dx, vi + dy
            if not (0 <= uu < width and 0 <= vv < height):
                continue
            if depth is not None:
                rec = depth[vv, uu]
                if rec > 0 and z > rec + occlusion_tol:
                    continue
            mask[vv, uu] = True
    return mask


def iou_boxes_oracle(min_a, max_a, min_b, max_b) -> float:
    """Closed-form box IoU with per-axis scalar arithmetic."""
    inter = 1.0
    for k in range(3):
        lo = max(min_a[k], min_b[k])
        hi = min(max_a[k], max_b[k])
        inter *= max(hi - lo, 0.0)
    vol_a = 1.0
    vol_b = 1.0
    for k in range(3):
        vol_a *= max_a[k] - min_a[k]
        vol_b *= max_b[k] - min_b[k]
    union = vol_a + vol_b - inter
    return inter / union if union > 0 else 0.0


def confusion_metrics_oracle(confusion: np.ndarray):
    """(mAcc, mIoU, fmIoU) from a GT-rows x prediction-columns count matrix."""
    C = np.asarray(confusion, dtype=np.float64)
    present = C.sum(axis=1) > 0
    accs, ious, weights = [], [], []
    for i in range(C.shape[0]):
        if not present[i]:
            continue
        tp = C[i, i]
        fn = C[i].sum() - tp
        fp = C[:, i].sum() - tp
        accs.append(tp / (tp + fn))
        denom = tp + fp + fn
        ious.append(tp / denom if denom > 0 else 0.0)
        weights.append(C[i].sum())
    weights = np.array(weights) / np.sum(weights)
    return float(np.mean(accs)), float(np.mean(ious)), float(weights @ np.array(ious))
