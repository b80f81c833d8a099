"""Evaluation metrics: 3D box IoU grounding accuracy, Recall@1, and
semantic-segmentation scores (mAcc / mIoU / frequency-weighted mIoU)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyGtError, LengthMismatchError

DEFAULT_THRESHOLDS = (0.1, 0.25, 0.5)
DEFAULT_TRANSFER_RADIUS = 0.05  # meters
UNMATCHED_LABEL = "unmatched"

KNOWN_TAGS = {"easy", "hard", "view_dep", "view_indep", "color", "shape", "target_mention"}


@dataclass(frozen=True)
class Aabb3:
    """Axis-aligned box as (min, max) corners in meters."""

    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(x) for x in np.asarray(self.min).reshape(3))
        hi = tuple(float(x) for x in np.asarray(self.max).reshape(3))
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"box min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @classmethod
    def from_center_extent(cls, center, extent) -> "Aabb3":
        c = np.asarray(center, dtype=np.float64).reshape(3)
        e = np.asarray(extent, dtype=np.float64).reshape(3)
        return cls(tuple(c - e / 2.0), tuple(c + e / 2.0))

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.max) - np.asarray(self.min)))


def iou_aabb(a: Aabb3, b: Aabb3) -> float:
    """Intersection volume over union volume; 0 for disjoint boxes.

    Degenerate zero-volume boxes never overlap anything (0/0 counts as 0),
    so flat, zero-extent predictions are never rewarded.
    """
    lo = np.maximum(np.asarray(a.min), np.asarray(b.min))
    hi = np.minimum(np.asarray(a.max), np.asarray(b.max))
    edges = np.clip(hi - lo, 0.0, None)
    inter = float(np.prod(edges))
    union = a.volume + b.volume - inter
    if union <= 0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class GroundingCase:
    query: str
    gt_box: Aabb3
    tags: frozenset = frozenset()

    def __post_init__(self):
        tags = frozenset(self.tags)
        if {"easy", "hard"} <= tags:
            raise ValueError(f"case {self.query!r}: easy and hard are exclusive tags")
        object.__setattr__(self, "tags", tags)


@dataclass
class AccuracyTable:
    """Acc@threshold overall and per tag subset."""

    thresholds: tuple[float, ...]
    n_cases: int
    overall: dict[float, float]
    per_tag: dict[str, dict[float, float]]
    tag_counts: dict[str, int]


def grounding_accuracy(
    predictions: Sequence[Aabb3],
    cases: Sequence[GroundingCase],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> AccuracyTable:
    """Fraction of cases whose predicted box exceeds each IoU threshold.

    "Exceeds" is strict (IoU > threshold). Tag subsets are evaluated over the
    union of tags the cases carry.
    """
    if len(predictions) != len(cases):
        raise LengthMismatchError(f"{len(predictions)} predictions for {len(cases)} cases")
    thresholds = tuple(thresholds)
    ious = np.array([iou_aabb(p, c.gt_box) for p, c in zip(predictions, cases)])

    def acc(indices, thr):
        if len(indices) == 0:
            return 0.0
        return float((ious[indices] > thr).mean())

    all_idx = np.arange(len(cases))
    tags = sorted({t for c in cases for t in c.tags})
    per_tag = {}
    tag_counts = {}
    for tag in tags:
        idx = np.array([i for i, c in enumerate(cases) if tag in c.tags])
        per_tag[tag] = {thr: acc(idx, thr) for thr in thresholds}
        tag_counts[tag] = int(len(idx))
    return AccuracyTable(
        thresholds=thresholds,
        n_cases=len(cases),
        overall={thr: acc(all_idx, thr) for thr in thresholds},
        per_tag=per_tag,
        tag_counts=tag_counts,
    )


def recall_at_1(predicted_ids: Sequence[int], gt_ids: Sequence[int]) -> float:
    """Mean exact-id match rate."""
    if len(predicted_ids) != len(gt_ids):
        raise LengthMismatchError(f"{len(predicted_ids)} predictions for {len(gt_ids)} ground truths")
    if len(gt_ids) == 0:
        return 0.0
    return float(np.mean([int(p) == int(g) for p, g in zip(predicted_ids, gt_ids)]))


@dataclass
class SemsegMetrics:
    macc: float
    miou: float
    fmiou: float
    per_class: dict


def semseg_metrics(pred_labels, gt_labels, class_set: Sequence[str]) -> SemsegMetrics:
    """Class-averaged accuracy and IoU over classes present in the GT.

    fmIoU weights each present class's IoU by its GT point frequency, so it
    equals mIoU when classes are balanced. Points predicted with labels
    outside ``class_set`` simply never score a true positive.
    """
    pred = np.asarray(pred_labels, dtype=object).reshape(-1)
    gt = np.asarray(gt_labels, dtype=object).reshape(-1)
    if pred.size != gt.size:
        raise LengthMismatchError(f"{pred.size} predicted labels for {gt.size} gt labels")
    if gt.size == 0:
        raise EmptyGtError("empty ground-truth label array")

    per_class = {}
    accs, ious, weights = [], [], []
    for cls in class_set:
        gt_c = gt == cls
        n_c = int(gt_c.sum())
        if n_c == 0:
            continue
        pred_c = pred == cls
        tp = int((gt_c & pred_c).sum())
        fp = int((pred_c & ~gt_c).sum())
        fn = n_c - tp
        acc = tp / n_c
        iou = tp / (tp + fp + fn) if (tp + fp + fn) > 0 else 0.0
        per_class[cls] = {"acc": acc, "iou": iou, "gt_points": n_c}
        accs.append(acc)
        ious.append(iou)
        weights.append(n_c)
    if not per_class:
        raise EmptyGtError("no class from class_set present in the ground truth")
    weights = np.asarray(weights, dtype=np.float64)
    weights = weights / weights.sum()
    return SemsegMetrics(
        macc=float(np.mean(accs)),
        miou=float(np.mean(ious)),
        fmiou=float(weights @ np.asarray(ious)),
        per_class=per_class,
    )


def transfer_labels(
    src_points: np.ndarray,
    src_labels,
    dst_points: np.ndarray,
    max_dist: float = DEFAULT_TRANSFER_RADIUS,
    miss_label: str = UNMATCHED_LABEL,
) -> np.ndarray:
    """Nearest-neighbor label transfer with a distance cap.

    Destination points without a source neighbor within ``max_dist`` get
    ``miss_label`` (they count as errors downstream).
    """
    src = np.asarray(src_points, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst_points, dtype=np.float64).reshape(-1, 3)
    labels = np.asarray(src_labels, dtype=object).reshape(-1)
    if src.shape[0] != labels.size:
        raise LengthMismatchError(f"{src.shape[0]} source points for {labels.size} labels")
    out = np.full(dst.shape[0], miss_label, dtype=object)
    if src.shape[0] == 0 or dst.shape[0] == 0:
        return out
    dists, idx = cKDTree(src).query(dst, k=1)
    hit = dists <= max_dist
    out[hit] = labels[idx[hit]]
    return out
