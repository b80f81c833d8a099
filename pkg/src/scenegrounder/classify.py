"""Open-vocabulary per-object classification by embedding similarity.

Each node's visual embedding is compared against text embeddings of the
queried class names (rendered through the "an image of <class>" prompt); the
argmax cosine similarity labels the object.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError, EndpointError, SchemaError
from .graph import SceneNode
from .objectmap import ObjectMap

log = logging.getLogger(__name__)

CLASS_PROMPT_TEMPLATE = "an image of {}"
UNKNOWN_LABEL = "unknown"


class TextEmbedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class FixtureTextEmbedder:
    """Deterministic text->vector table for offline runs."""

    def __init__(self, table: dict[str, Sequence[float]]):
        self._table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}

    @classmethod
    def from_json(cls, path: str | Path) -> "FixtureTextEmbedder":
        try:
            return cls(json.loads(Path(path).read_text()))
        except (ValueError, AttributeError) as err:
            raise SchemaError(f"{path}: bad text-embedding table: {err}")

    def embed(self, text: str) -> np.ndarray:
        if text not in self._table:
            raise KeyError(f"no fixture embedding for text {text!r}")
        v = self._table[text]
        return v / np.linalg.norm(v)


ENV_EMBED_BASE_URL = "SCENEGROUNDER_EMBED_BASE_URL"
ENV_EMBED_MODEL = "SCENEGROUNDER_EMBED_MODEL"
ENV_EMBED_API_KEY = "SCENEGROUNDER_EMBED_API_KEY"


class HttpTextEmbedder:
    """Client for an embeddings service speaking the usual /embeddings shape."""

    def __init__(self, base_url: str | None = None, model: str | None = None,
                 api_key: str | None = None, timeout: float = 60.0):
        self.base_url = base_url or os.environ.get(ENV_EMBED_BASE_URL)
        self.model = model or os.environ.get(ENV_EMBED_MODEL)
        self.api_key = api_key or os.environ.get(ENV_EMBED_API_KEY)
        if not self.base_url or not self.model:
            raise ConfigError(
                f"embedding endpoint needs a base URL and model ({ENV_EMBED_BASE_URL}, {ENV_EMBED_MODEL})"
            )
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        resp = requests.post(
            self.base_url.rstrip("/") + "/embeddings",
            json={"model": self.model, "input": text},
            headers=headers,
            timeout=self.timeout,
        )
        if resp.status_code != 200:
            raise EndpointError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            v = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, ValueError) as err:
            raise EndpointError(f"malformed embeddings response: {err}")
        return v / np.linalg.norm(v)


@dataclass
class ClassifiedObject:
    object_id: int
    label: str
    score: float


def classify_objects(
    nodes: list[SceneNode],
    class_names: Sequence[str],
    embedder: TextEmbedder,
    prompt_template: str = CLASS_PROMPT_TEMPLATE,
) -> list[ClassifiedObject]:
    """Label every embedded node with its argmax-similarity class.

    Ties break to the first class in input order. Nodes without a visual
    embedding are skipped with a warning, so len(result) + skipped equals
    len(nodes).
    """
    if not class_names:
        raise ValueError("classify_objects needs at least one class name")
    text_embs = np.stack([embedder.embed(prompt_template.format(name)) for name in class_names])
    text_embs = text_embs / np.linalg.norm(text_embs, axis=1, keepdims=True)
    results = []
    for node in nodes:
        if node.visual_embedding is None:
            log.warning("object %d: missing visual embedding, skipping", node.id)
            continue
        v = np.asarray(node.visual_embedding, dtype=np.float64)
        v = v / np.linalg.norm(v)
        sims = text_embs @ v
        best = int(np.argmax(sims))
        results.append(ClassifiedObject(object_id=int(node.id), label=class_names[best],
                                        score=float(sims[best])))
    return results


def label_point_cloud(map: ObjectMap, classifications: list[ClassifiedObject]):
    """Propagate object labels to points; unclassified objects get "unknown".

    Returns (points, labels) with objects concatenated in id order.
    """
    label_by_id = {c.object_id: c.label for c in classifications}
    chunks, labels = [], []
    for obj in sorted(map.objects.values(), key=lambda o: o.id):
        chunks.append(np.asarray(obj.points, dtype=np.float64))
        labels.extend([label_by_id.get(obj.id, UNKNOWN_LABEL)] * obj.points.shape[0])
    points = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 3))
    return points, np.asarray(labels, dtype=object)
