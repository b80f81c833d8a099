"""Per-frame detection lifting: filtration, denoising and descriptor pooling.

A raw 2D proposal is a (mask, confidence) pair plus a pooled visual
descriptor. Lifting turns the survivors into :class:`Detection` objects with
world-frame point clouds, ready for map association.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import DBSCAN

from .errors import AllNoiseError, EmptyMaskError, EmptyProjectionError
from .geometry import Frame, aabb_of_points, project_mask_to_points

log = logging.getLogger(__name__)


@dataclass
class FilterConfig:
    """Thresholds for the proposal filtration checks."""

    min_confidence: float = 0.5
    min_mask_px: int = 100
    max_mask_fraction: float = 0.8
    dbscan_eps: float = 0.05
    dbscan_min_pts: int = 10

    def validate(self):
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError(f"min_confidence must be in [0, 1], got {self.min_confidence}")
        if self.min_mask_px < 1:
            raise ValueError("min_mask_px must be >= 1")
        if not 0.0 < self.max_mask_fraction <= 1.0:
            raise ValueError("max_mask_fraction must be in (0, 1]")
        if self.dbscan_eps <= 0:
            raise ValueError("dbscan_eps must be > 0")
        if self.dbscan_min_pts < 1:
            raise ValueError("dbscan_min_pts must be >= 1")


@dataclass
class Detection:
    """One 2D proposal lifted to a world-frame point cloud.

    ``descriptor`` is L2-normalized on construction; ``points`` must be
    non-empty (denoising happens before a Detection is built). ``mask`` may
    be None for detections built directly from point clouds (tests,
    benchmarks).
    """

    confidence: float
    descriptor: np.ndarray
    points: np.ndarray
    mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        d = np.asarray(self.descriptor, dtype=np.float64).reshape(-1)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("descriptor has zero norm")
        self.descriptor = d / n
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] < 1:
            raise ValueError("detection must keep at least one point")
        self.points = pts
        self.aabb_min, self.aabb_max = aabb_of_points(pts)


def filter_proposals(detections, config: FilterConfig):
    """Keep proposals passing the confidence / area / fraction checks.

    ``detections`` is a sequence whose items expose the mask at index 0 and
    the confidence at index 1 (extra fields pass through untouched). A kept
    item satisfies confidence >= min_confidence, mask area >= min_mask_px
    and area / (H*W) <= max_mask_fraction. Order is preserved.
    """
    kept = []
    for item in detections:
        mask = np.asarray(item[0], dtype=bool)
        confidence = float(item[1])
        area = int(mask.sum())
        total = mask.shape[0] * mask.shape[1]
        if confidence < config.min_confidence:
            continue
        if area < config.min_mask_px:
            continue
        if area / total > config.max_mask_fraction:
            continue
        kept.append(item)
    return kept


def dbscan_denoise(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Keep the largest DBSCAN cluster of ``points``; drop noise.

    Ties between equal-sized clusters resolve to the lowest cluster label
    (the earliest-seeded cluster). Raises AllNoiseError when every point is
    labeled noise.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    labels = DBSCAN(eps=eps, min_samples=min_pts).fit(pts).labels_
    n_clusters = labels.max() + 1
    if n_clusters <= 0:
        raise AllNoiseError(f"all {pts.shape[0]} points labeled noise (eps={eps}, min_pts={min_pts})")
    counts = np.bincount(labels[labels >= 0], minlength=n_clusters)
    best = int(np.argmax(counts))  # argmax takes the first max: lowest label wins ties
    return pts[labels == best]


def pool_descriptor(feature_grid: np.ndarray, mask: np.ndarray, stride: int) -> np.ndarray:
    """Average the feature cells covered by ``mask`` and L2-normalize.

    The full-resolution mask is downsampled to the grid resolution by
    nearest-neighbor sampling at each cell center, i.e. grid cell (i, j)
    is covered iff ``mask[i*stride + stride//2, j*stride + stride//2]``.
    Raises EmptyMaskError when no cell is covered.
    """
    grid = np.asarray(feature_grid, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    gh, gw = grid.shape[0], grid.shape[1]
    if mask.shape[0] // stride != gh or mask.shape[1] // stride != gw:
        raise ValueError(
            f"feature grid {gh}x{gw} inconsistent with mask {mask.shape} at stride {stride}"
        )
    small = mask[stride // 2 :: stride, stride // 2 :: stride][:gh, :gw]
    if not small.any():
        raise EmptyMaskError("mask covers no feature cell")
    mean = grid[small].mean(axis=0)
    n = np.linalg.norm(mean)
    if n == 0:
        raise EmptyMaskError("covered cells average to a zero feature")
    return mean / n


def lift_frame_detections(
    frame: Frame,
    proposals,
    config: FilterConfig,
    subsample_stride: int = 2,
) -> list[Detection]:
    """Filter, back-project and denoise one frame's raw proposals.

    ``proposals`` is a sequence of (mask, confidence, descriptor) triples.
    Proposals that fail projection or lose every point to denoising are
    skipped with a log line; the survivors come back as Detections in input
    order.
    """
    kept = filter_proposals(proposals, config)
    detections = []
    for i, (mask, confidence, descriptor) in enumerate(kept):
        try:
            pts = project_mask_to_points(frame, mask, subsample_stride)
            pts = dbscan_denoise(pts, config.dbscan_eps, config.dbscan_min_pts)
        except (EmptyProjectionError, AllNoiseError) as err:
            log.warning("frame %d: skipping proposal %d: %s", frame.index, i, err)
            continue
        detections.append(
            Detection(confidence=float(confidence), descriptor=descriptor, points=pts, mask=np.asarray(mask, dtype=bool))
        )
    return detections
