"""Scene-graph nodes and metric/semantic spatial edges.

A node is (id, caption, center, extent); an edge between a target and an
anchor carries the Euclidean center distance and a triple of view-dependent
relations (left|right, front|behind, above|below) evaluated from a virtual
camera placed at the room center and aimed at the anchor.

The graph file is plain JSON and is the contract between mapping and
reasoning::

    {"objects": [{"id": int, "caption": str,
                  "bbox_center": [x, y, z], "bbox_extent": [dx, dy, dz]}]}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import DescriberUnavailableError, SchemaError
from .objectmap import MapObject, ObjectMap
from .views import BestView

log = logging.getLogger(__name__)

TIE_EPS = 1e-6
DEGENERATE_FORWARD_DOT = 0.999

LEFT, RIGHT = "left", "right"
FRONT, BEHIND = "front", "behind"
ABOVE, BELOW = "above", "below"


@dataclass(frozen=True)
class SemanticTriple:
    lr: str
    fb: str
    ab: str

    def __post_init__(self):
        if self.lr not in (LEFT, RIGHT) or self.fb not in (FRONT, BEHIND) or self.ab not in (ABOVE, BELOW):
            raise ValueError(f"invalid relation triple ({self.lr}, {self.fb}, {self.ab})")

    def words(self) -> tuple[str, str, str]:
        return (self.lr, self.fb, self.ab)


@dataclass
class SceneNode:
    id: int
    caption: str
    center: np.ndarray
    extent: np.ndarray
    visual_embedding: np.ndarray | None = field(default=None, repr=False)
    valid: bool = True

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        ext = np.asarray(self.extent, dtype=np.float64).reshape(3)
        if (ext < 0).any():
            raise ValueError(f"node {self.id}: extent must be non-negative, got {ext}")
        self.extent = ext


@dataclass
class Edge:
    target_id: int
    anchor_id: int
    distance: float
    semantic: SemanticTriple


class Describer(Protocol):
    """Captioning backend contract: image crop in, caption text out."""

    def describe(self, crop: np.ndarray | None) -> str: ...


class ConstantDescriber:
    """Fixture describer returning one fixed caption (deterministic)."""

    def __init__(self, caption: str):
        self.caption = caption

    def describe(self, crop) -> str:
        return self.caption


def node_from_object(
    obj: MapObject,
    view: BestView,
    describer: Describer,
    rgb: np.ndarray | None = None,
    visual_embedding: np.ndarray | None = None,
) -> SceneNode:
    """Build a graph node: AABB center/extent plus a caption for the best-view crop.

    A DescriberUnavailableError from the backend yields a node with an empty
    caption and ``valid=False`` instead of propagating.
    """
    crop = None
    if rgb is not None:
        x0, y0, x1, y1 = view.crop_box
        crop = rgb[y0:y1, x0:x1]
    try:
        caption = describer.describe(crop)
        valid = bool(caption)
    except DescriberUnavailableError as err:
        log.warning("object %d: describer unavailable: %s", obj.id, err)
        caption, valid = "", False
    return SceneNode(
        id=obj.id,
        caption=caption,
        center=obj.center,
        extent=obj.extent,
        visual_embedding=visual_embedding,
        valid=valid,
    )


def metric_relation(center_i: np.ndarray, center_j: np.ndarray) -> float:
    """Euclidean distance between two box centers."""
    a = np.asarray(center_i, dtype=np.float64).reshape(3)
    b = np.asarray(center_j, dtype=np.float64).reshape(3)
    return float(np.linalg.norm(a - b))


def room_center(nodes: list[SceneNode], camera_positions: np.ndarray | None = None) -> np.ndarray:
    """Center of the AABB enclosing every node's box.

    When the camera trajectory is available its mean height replaces the z
    component, approximating the observer's eye level.
    """
    if not nodes:
        raise ValueError("room_center needs at least one node")
    lows = np.stack([n.center - n.extent / 2.0 for n in nodes])
    highs = np.stack([n.center + n.extent / 2.0 for n in nodes])
    center = (lows.min(axis=0) + highs.max(axis=0)) / 2.0
    if camera_positions is not None:
        cams = np.asarray(camera_positions, dtype=np.float64).reshape(-1, 3)
        if cams.shape[0] > 0:
            center[2] = cams[:, 2].mean()
    return center


def semantic_relation(target_center, anchor_center, room_center) -> SemanticTriple:
    """View-dependent relation triple from a virtual camera at the room center.

    The camera looks along ``f = normalize(anchor - room_center)`` with world
    +z as up and right axis ``r = normalize(f x up)``:

    * lr: ``left`` iff dot(target - anchor, r) < -eps, else ``right``;
    * fb: ``front`` iff the target's depth along f is smaller than the
      anchor's by more than eps, else ``behind``;
    * ab: ``above`` iff target z exceeds anchor z by more than eps, else
      ``below`` (view-independent, taken from world z).

    Exact ties therefore resolve to (right, behind, below). Degenerate
    geometry falls back deterministically: anchor at the room center uses
    f=+x, and f parallel to up swaps the up axis to world +x.
    """
    t = np.asarray(target_center, dtype=np.float64).reshape(3)
    a = np.asarray(anchor_center, dtype=np.float64).reshape(3)
    c = np.asarray(room_center, dtype=np.float64).reshape(3)

    f = a - c
    norm = np.linalg.norm(f)
    if norm < TIE_EPS:
        f = np.array([1.0, 0.0, 0.0])  # FallbackAxis: anchor sits at the room center
    else:
        f = f / norm
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(f @ up)) > DEGENERATE_FORWARD_DOT:
        up = np.array([1.0, 0.0, 0.0])  # DegenerateCamera: looking straight up/down
    r = np.cross(f, up)
    r = r / np.linalg.norm(r)

    lr = LEFT if float((t - a) @ r) < -TIE_EPS else RIGHT
    fb = FRONT if float((t - c) @ f) < float((a - c) @ f) - TIE_EPS else BEHIND
    ab = ABOVE if t[2] > a[2] + TIE_EPS else BELOW
    return SemanticTriple(lr, fb, ab)


def edge_between(target: SceneNode, anchor: SceneNode, room: np.ndarray) -> Edge:
    return Edge(
        target_id=target.id,
        anchor_id=anchor.id,
        distance=metric_relation(target.center, anchor.center),
        semantic=semantic_relation(target.center, anchor.center, room),
    )


def relation_sentence(node_i: SceneNode, node_j: SceneNode, edge: Edge) -> str:
    """Render one edge as the fixed sentence template.

    Distances print with two decimals; captions are embedded verbatim (JSON
    escaping happens downstream when sentences are serialized into prompts).
    """
    if {edge.target_id, edge.anchor_id} != {node_i.id, node_j.id} and edge.target_id != edge.anchor_id:
        raise ValueError("edge does not connect the given nodes")
    lr, fb, ab = edge.semantic.words()
    return (
        f"The {node_i.caption} with id {node_i.id} is {lr}, {fb}, {ab} "
        f"and at distance {edge.distance:.2f} m from the {node_j.caption} with id {node_j.id}"
    )


# ---------------------------------------------------------------------------
# graph file IO


def scene_graph_to_dict(nodes: list[SceneNode]) -> dict:
    return {
        "objects": [
            {
                "id": int(n.id),
                "caption": n.caption,
                "bbox_center": [float(x) for x in n.center],
                "bbox_extent": [float(x) for x in n.extent],
            }
            for n in nodes
        ]
    }


def save_scene_graph(path: str | Path, nodes: list[SceneNode]):
    Path(path).write_text(json.dumps(scene_graph_to_dict(nodes), indent=2))


def load_scene_graph(path: str | Path) -> list[SceneNode]:
    try:
        data = json.loads(Path(path).read_text())
        nodes = [
            SceneNode(
                id=int(o["id"]),
                caption=str(o["caption"]),
                center=o["bbox_center"],
                extent=o["bbox_extent"],
            )
            for o in data["objects"]
        ]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as err:
        raise SchemaError(f"{path}: bad scene graph: {err}")
    seen = set()
    for n in nodes:
        if n.id in seen:
            raise SchemaError(f"{path}: duplicate object id {n.id}")
        seen.add(n.id)
    return nodes


def attach_embeddings(nodes: list[SceneNode], table: dict[int, np.ndarray]):
    """Attach per-object visual embeddings (normalized) from an id-keyed table."""
    for n in nodes:
        vec = table.get(n.id)
        if vec is None:
            continue
        v = np.asarray(vec, dtype=np.float64).reshape(-1)
        n.visual_embedding = v / np.linalg.norm(v)


def load_embedding_table(path: str | Path) -> dict[int, np.ndarray]:
    try:
        data = json.loads(Path(path).read_text())
        return {int(k): np.asarray(v, dtype=np.float64) for k, v in data.items()}
    except (ValueError, AttributeError, json.JSONDecodeError) as err:
        raise SchemaError(f"{path}: bad embedding table: {err}")


def load_caption_table(path: str | Path) -> dict[int, str]:
    """Caption fixtures: either a plain id->caption object or {"captions": {...}}."""
    try:
        data = json.loads(Path(path).read_text())
        if isinstance(data, dict) and "captions" in data:
            data = data["captions"]
        return {int(k): str(v) for k, v in data.items()}
    except (ValueError, AttributeError, json.JSONDecodeError) as err:
        raise SchemaError(f"{path}: bad caption table: {err}")


def build_scene_nodes(
    map: ObjectMap,
    views: dict[int, BestView],
    describer: Describer | None = None,
    captions: dict[int, str] | None = None,
    frames_rgb: dict[int, np.ndarray] | None = None,
    embeddings: dict[int, np.ndarray] | None = None,
) -> list[SceneNode]:
    """Assemble nodes for every object that has a resolved best view.

    Captions come from the id-keyed fixture table when given, otherwise from
    the describer applied to the best-view crop.
    """
    nodes = []
    for obj in sorted(map.objects.values(), key=lambda o: o.id):
        view = views.get(obj.id)
        if view is None:
            continue
        if captions is not None and obj.id in captions:
            caption = captions[obj.id]
            node = SceneNode(id=obj.id, caption=caption, center=obj.center, extent=obj.extent,
                            valid=bool(caption))
        else:
            rgb = (frames_rgb or {}).get(view.frame_index)
            node = node_from_object(obj, view, describer or ConstantDescriber(""), rgb)
        if embeddings is not None and obj.id in embeddings:
            v = np.asarray(embeddings[obj.id], dtype=np.float64).reshape(-1)
            node.visual_embedding = v / np.linalg.norm(v)
        nodes.append(node)
    return nodes
