from __future__ import annotations

import numpy as np
import pytest

from scenegrounder.classify import (
    CLASS_PROMPT_TEMPLATE,
    FixtureTextEmbedder,
    classify_objects,
    label_point_cloud,
)
from scenegrounder.graph import SceneNode
from scenegrounder.ingest import Detection
from scenegrounder.objectmap import ObjectMap


def embedded_node(i, caption, vec):
    n = SceneNode(id=i, caption=caption, center=np.zeros(3), extent=np.ones(3))
    n.visual_embedding = np.asarray(vec, dtype=float)
    return n


def fixture_embedder(classes, dim=None):
    dim = dim or len(classes)
    table = {}
    for k, name in enumerate(classes):
        v = np.zeros(dim)
        v[k] = 1.0
        table[CLASS_PROMPT_TEMPLATE.format(name)] = v
    return FixtureTextEmbedder(table)


class TestClassifyObjects:
    def test_exact_match_scores_one(self):
        classes = ["chair", "table"]
        emb = fixture_embedder(classes)
        nodes = [embedded_node(0, "x", [1.0, 0.0])]
        out = classify_objects(nodes, classes, emb)
        assert out[0].label == "chair"
        assert out[0].score == pytest.approx(1.0)

    def test_single_class_labels_everything(self, rng):
        classes = ["sofa"]
        emb = FixtureTextEmbedder({CLASS_PROMPT_TEMPLATE.format("sofa"): rng.normal(size=8)})
        nodes = [embedded_node(i, "n", rng.normal(size=8)) for i in range(5)]
        out = classify_objects(nodes, classes, emb)
        assert [c.label for c in out] == ["sofa"] * 5

    def test_matches_exhaustive_dot_product_oracle(self, rng):
        classes = ["a", "b", "c", "d"]
        table = {CLASS_PROMPT_TEMPLATE.format(n): rng.normal(size=16) for n in classes}
        emb = FixtureTextEmbedder(table)
        nodes = [embedded_node(i, "n", rng.normal(size=16)) for i in range(5)]
        out = classify_objects(nodes, classes, emb)
        for node, result in zip(nodes, out):
            v = node.visual_embedding / np.linalg.norm(node.visual_embedding)
            sims = {}
            for name in classes:
                tv = table[CLASS_PROMPT_TEMPLATE.format(name)]
                sims[name] = (tv / np.linalg.norm(tv)) @ v
            best = max(sims.values())
            assert result.label == next(n for n in classes if sims[n] == best)
            assert result.score == pytest.approx(best)

    def test_tie_breaks_to_first_class(self):
        table = {
            CLASS_PROMPT_TEMPLATE.format("x"): np.array([1.0, 0.0]),
            CLASS_PROMPT_TEMPLATE.format("y"): np.array([1.0, 0.0]),
        }
        out = classify_objects([embedded_node(0, "n", [1.0, 0.0])], ["x", "y"],
                               FixtureTextEmbedder(table))
        assert out[0].label == "x"

    def test_missing_embedding_skipped_with_warning(self, caplog):
        classes = ["chair"]
        emb = fixture_embedder(classes, dim=2)
        nodes = [embedded_node(0, "n", [1.0, 0.0]),
                 SceneNode(id=1, caption="m", center=np.zeros(3), extent=np.ones(3))]
        with caplog.at_level("WARNING"):
            out = classify_objects(nodes, classes, emb)
        assert len(out) + 1 == len(nodes)
        assert "missing visual embedding" in caplog.text

    def test_invariant_to_positive_rescaling(self, rng):
        classes = ["a", "b", "c"]
        table = {CLASS_PROMPT_TEMPLATE.format(n): rng.normal(size=8) for n in classes}
        nodes = [embedded_node(i, "n", rng.normal(size=8)) for i in range(4)]
        out1 = classify_objects(nodes, classes, FixtureTextEmbedder(table))
        scaled = [embedded_node(n.id, n.caption, n.visual_embedding * 7.5) for n in nodes]
        out2 = classify_objects(scaled, classes, FixtureTextEmbedder(table))
        assert [c.label for c in out1] == [c.label for c in out2]


class TestLabelPointCloud:
    def _map(self, sizes):
        m = ObjectMap()
        for k, n in enumerate(sizes):
            pts = np.full((n, 3), float(k))
            m.add(Detection(confidence=1.0, descriptor=[1.0], points=pts), 0)
        return m

    def test_single_object_uniform_labels(self):
        from scenegrounder.classify import ClassifiedObject

        m = self._map([100])
        pts, labels = label_point_cloud(m, [ClassifiedObject(0, "chair", 0.9)])
        assert pts.shape == (100, 3)
        assert (labels == "chair").all()

    def test_empty_classification_all_unknown(self):
        m = self._map([10, 20])
        _, labels = label_point_cloud(m, [])
        assert (labels == "unknown").all()

    def test_label_histogram_matches_point_counts(self):
        from scenegrounder.classify import ClassifiedObject

        m = self._map([10, 20, 30])
        cls = [ClassifiedObject(0, "chair", 0.9), ClassifiedObject(2, "table", 0.8)]
        pts, labels = label_point_cloud(m, cls)
        assert pts.shape == (60, 3)
        assert int((labels == "chair").sum()) == 10
        assert int((labels == "unknown").sum()) == 20
        assert int((labels == "table").sum()) == 30
