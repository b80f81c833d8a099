"""Incremental object-centric 3D map.

Detections are associated to persistent objects by visual cosine similarity
among spatially intersecting candidates; descriptors are fused with a moving
average that weights the incoming detection higher. Periodically the map is
compacted by merging near-duplicate objects, and after a sequence finishes a
postprocess pass drops outliers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import aabb_of_points, aabbs_intersect
from .ingest import Detection

log = logging.getLogger(__name__)

SPATIAL_OVERLAP_RADIUS = 0.025  # meters


@dataclass
class AssociationConfig:
    """Thresholds and weights of the association / merge process."""

    sigma_vis: float = 0.75
    w_new: float = 0.75
    merge_period: int = 10
    sigma_vis_merge: float = 0.65
    overlap_thr: float = 0.25
    aabb_inflate: float = 0.1
    overlap_radius: float = SPATIAL_OVERLAP_RADIUS
    post_min_points: int = 25
    post_min_detections: int = 3
    post_max_extent: float = 6.0
    max_points_per_object: int = 50_000
    downsample_voxel: float = 0.01

    def validate(self):
        if not -1.0 <= self.sigma_vis <= 1.0:
            raise ValueError("sigma_vis must be a cosine similarity in [-1, 1]")
        if not 0.5 < self.w_new <= 1.0:
            raise ValueError("w_new must be in (0.5, 1]: incoming descriptors get the higher weight")
        if self.sigma_vis_merge >= self.sigma_vis:
            raise ValueError("sigma_vis_merge must be < sigma_vis")
        if not 0.0 <= self.overlap_thr <= 1.0:
            raise ValueError("overlap_thr must be in [0, 1]")
        if self.merge_period < 1:
            raise ValueError("merge_period must be >= 1")
        if self.aabb_inflate < 0 or self.overlap_radius <= 0:
            raise ValueError("aabb_inflate must be >= 0 and overlap_radius > 0")
        if self.post_min_points < 1 or self.post_min_detections < 1 or self.post_max_extent <= 0:
            raise ValueError("postprocess thresholds out of range")


@dataclass
class MapObject:
    """Accumulated 3D instance: points, fused descriptor, bookkeeping."""

    id: int
    points: np.ndarray
    descriptor: np.ndarray
    num_detections: int
    frame_indices: list[int]
    aabb_min: np.ndarray = field(init=False)
    aabb_max: np.ndarray = field(init=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float32).reshape(-1, 3)
        d = np.asarray(self.descriptor, dtype=np.float64).reshape(-1)
        self.descriptor = d / np.linalg.norm(d)
        self._refresh_aabb()

    def _refresh_aabb(self):
        self.aabb_min, self.aabb_max = aabb_of_points(self.points)

    @property
    def center(self) -> np.ndarray:
        return (self.aabb_min + self.aabb_max) / 2.0

    @property
    def extent(self) -> np.ndarray:
        return self.aabb_max - self.aabb_min


class ObjectMap:
    """Single-writer map of persistent objects, keyed by id.

    Ids are assigned by a monotonic counter and never reused within a run.
    """

    def __init__(self):
        self.objects: dict[int, MapObject] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.objects)

    def __iter__(self):
        return iter(self.objects.values())

    def add(self, detection: Detection, frame_index: int) -> MapObject:
        obj = MapObject(
            id=self._next_id,
            points=detection.points,
            descriptor=detection.descriptor,
            num_detections=1,
            frame_indices=[frame_index],
        )
        self.objects[obj.id] = obj
        self._next_id += 1
        return obj

    def total_points(self) -> int:
        return sum(o.points.shape[0] for o in self.objects.values())


def candidate_objects(map: ObjectMap, detection: Detection, aabb_inflate: float = 0.1) -> list[int]:
    """Ids of objects whose inflated AABB intersects the detection's AABB."""
    objs = list(map.objects.values())
    if not objs:
        return []
    mins = np.stack([o.aabb_min for o in objs]) - aabb_inflate
    maxs = np.stack([o.aabb_max for o in objs]) + aabb_inflate
    hit = np.all(mins <= detection.aabb_max, axis=1) & np.all(detection.aabb_min <= maxs, axis=1)
    return [objs[i].id for i in np.nonzero(hit)[0]]


def associate(
    map: ObjectMap,
    detection: Detection,
    sigma_vis: float,
    aabb_inflate: float = 0.1,
) -> int | None:
    """Decide merge target for a detection, or None to start a new object.

    Among spatially intersecting candidates the best cosine similarity wins
    iff it reaches sigma_vis (boundary inclusive); ties break to the lowest
    object id. Returns the chosen object id or None.
    """
    candidates = candidate_objects(map, detection, aabb_inflate)
    if not candidates:
        return None
    descs = np.stack([map.objects[i].descriptor for i in candidates])
    sims = descs @ detection.descriptor
    best = float(sims.max())
    if best < sigma_vis:
        return None
    # candidates iterate in insertion order == ascending id; argmax takes the first max
    return candidates[int(np.argmax(sims))]


def _cap_points(points: np.ndarray, max_points: int, voxel: float) -> np.ndarray:
    """Voxel-downsample once the per-object point budget is exceeded.

    Keeps the first point of each occupied voxel, preserving input order, so
    the result is deterministic.
    """
    if points.shape[0] <= max_points:
        return points
    cells = np.floor(points.astype(np.float64) / voxel).astype(np.int64)
    _, first = np.unique(cells, axis=0, return_index=True)
    return points[np.sort(first)]


def merge_detection(obj: MapObject, detection: Detection, frame_index: int, w_new: float,
                    max_points: int = 50_000, voxel: float = 0.01) -> MapObject:
    """Fold a detection into an object (point union + moving-average descriptor)."""
    obj.points = _cap_points(
        np.concatenate([obj.points, detection.points.astype(np.float32)], axis=0), max_points, voxel
    )
    obj.num_detections += 1
    if frame_index not in obj.frame_indices:
        obj.frame_indices.append(frame_index)
        obj.frame_indices.sort()
    d = w_new * detection.descriptor + (1.0 - w_new) * obj.descriptor
    obj.descriptor = d / np.linalg.norm(d)
    obj._refresh_aabb()
    return obj


def spatial_overlap(points_a: np.ndarray, points_b: np.ndarray, radius: float = SPATIAL_OVERLAP_RADIUS) -> float:
    """Fraction of the smaller set's points with a neighbor in the other set.

    Symmetric by the min-cardinality convention; both sets must be non-empty.
    """
    a = np.asarray(points_a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(points_b, dtype=np.float64).reshape(-1, 3)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("spatial_overlap needs two non-empty point sets")
    small, other = (a, b) if a.shape[0] <= b.shape[0] else (b, a)
    dists, _ = cKDTree(other).query(small, k=1)
    return float(np.count_nonzero(dists <= radius) / small.shape[0])


def _merge_objects(map: ObjectMap, id_a: int, id_b: int, max_points: int, voxel: float):
    """Merge the higher id into the lower; descriptor fused by detection counts."""
    lo, hi = (id_a, id_b) if id_a < id_b else (id_b, id_a)
    keep, gone = map.objects[lo], map.objects[hi]
    keep.points = _cap_points(np.concatenate([keep.points, gone.points], axis=0), max_points, voxel)
    d = keep.num_detections * keep.descriptor + gone.num_detections * gone.descriptor
    norm = np.linalg.norm(d)
    if norm > 0:
        keep.descriptor = d / norm
    keep.num_detections += gone.num_detections
    keep.frame_indices = sorted(set(keep.frame_indices) | set(gone.frame_indices))
    keep._refresh_aabb()
    del map.objects[hi]


def periodic_merge(
    map: ObjectMap,
    sigma_vis_merge: float,
    overlap_thr: float,
    overlap_radius: float = SPATIAL_OVERLAP_RADIUS,
    max_points: int = 50_000,
    voxel: float = 0.01,
) -> ObjectMap:
    """Greedy duplicate compaction.

    Repeatedly merges the qualifying pair (similarity >= sigma_vis_merge and
    spatial overlap >= overlap_thr) with the highest similarity, until no
    pair qualifies. The merged object keeps the lower id. Idempotent: a
    second immediate call changes nothing.
    """
    while True:
        ids = sorted(map.objects.keys())
        if len(ids) < 2:
            return map
        descs = np.stack([map.objects[i].descriptor for i in ids])
        sims = descs @ descs.T
        iu, ju = np.triu_indices(len(ids), k=1)
        order = np.argsort(-sims[iu, ju], kind="stable")
        merged = False
        for k in order:
            s = sims[iu[k], ju[k]]
            if s < sigma_vis_merge:
                break
            a, b = map.objects[ids[iu[k]]], map.objects[ids[ju[k]]]
            # cheap reject: boxes further apart than the radius cannot overlap
            if overlap_thr > 0 and not aabbs_intersect(
                a.aabb_min, a.aabb_max, b.aabb_min, b.aabb_max, overlap_radius
            ):
                continue
            if spatial_overlap(a.points, b.points, overlap_radius) >= overlap_thr:
                _merge_objects(map, a.id, b.id, max_points, voxel)
                merged = True
                break
        if not merged:
            return map


def postprocess(map: ObjectMap, config: AssociationConfig) -> ObjectMap:
    """Drop outlier objects: too few points or detections, or oversized."""
    keep = {}
    for oid, obj in map.objects.items():
        if obj.points.shape[0] < config.post_min_points:
            continue
        if obj.num_detections < config.post_min_detections:
            continue
        if float(obj.extent.max()) > config.post_max_extent:
            continue
        keep[oid] = obj
    map.objects = keep
    return map


def integrate_frame(map: ObjectMap, detections: list[Detection], frame_index: int, config: AssociationConfig) -> ObjectMap:
    """Fold one frame's detections into the map.

    An empty map initializes objects straight from the detections; otherwise
    each detection is associated in input order against the current map
    (including objects inserted earlier in the same frame). Every
    merge_period frames the periodic compaction runs. Deterministic given
    input order.
    """
    if len(map) == 0:
        for det in detections:
            map.add(det, frame_index)
    else:
        for i, det in enumerate(detections):
            if det.points.shape[0] == 0:
                log.warning("frame %d: skipping empty detection %d", frame_index, i)
                continue
            target = associate(map, det, config.sigma_vis, config.aabb_inflate)
            if target is None:
                map.add(det, frame_index)
            else:
                merge_detection(
                    map.objects[target], det, frame_index, config.w_new,
                    config.max_points_per_object, config.downsample_voxel,
                )
    if frame_index % config.merge_period == 0:
        periodic_merge(
            map, config.sigma_vis_merge, config.overlap_thr, config.overlap_radius,
            config.max_points_per_object, config.downsample_voxel,
        )
    return map
