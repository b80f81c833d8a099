from __future__ import annotations

import numpy as np
import pytest

from scenegrounder.errors import EmptyGtError, LengthMismatchError
from scenegrounder.metrics import (
    Aabb3,
    GroundingCase,
    grounding_accuracy,
    iou_aabb,
    recall_at_1,
    semseg_metrics,
    transfer_labels,
)

from oracles import confusion_metrics_oracle, iou_boxes_oracle


def box(mn, mx):
    return Aabb3(tuple(mn), tuple(mx))


class TestIouAabb:
    def test_identical_boxes(self):
        b = box([0, 0, 0], [1, 2, 3])
        assert iou_aabb(b, b) == pytest.approx(1.0)

    def test_disjoint_boxes(self):
        assert iou_aabb(box([0, 0, 0], [1, 1, 1]), box([5, 5, 5], [6, 6, 6])) == 0.0

    def test_unit_cube_shifted_half(self):
        # intersection 0.5, union 1.5 -> 1/3; shifted on one axis only
        a = box([0, 0, 0], [1, 1, 1])
        b = box([0.5, 0, 0], [1.5, 1, 1])
        assert iou_aabb(a, b) == pytest.approx(0.5 / 1.5)

    def test_matches_closed_form_oracle(self, rng):
        for _ in range(100):
            mn1 = rng.uniform(-2, 2, size=3)
            mn2 = rng.uniform(-2, 2, size=3)
            a = box(mn1, mn1 + rng.uniform(0.1, 2, size=3))
            b = box(mn2, mn2 + rng.uniform(0.1, 2, size=3))
            expected = iou_boxes_oracle(a.min, a.max, b.min, b.max)
            assert iou_aabb(a, b) == pytest.approx(expected, abs=1e-9)

    def test_symmetric_and_translation_invariant(self, rng):
        mn1 = rng.uniform(-1, 1, size=3)
        mn2 = rng.uniform(-1, 1, size=3)
        a = box(mn1, mn1 + [1, 1, 1])
        b = box(mn2, mn2 + [0.5, 2, 1])
        assert iou_aabb(a, b) == iou_aabb(b, a)
        shift = rng.normal(size=3)
        a2 = box(np.array(a.min) + shift, np.array(a.max) + shift)
        b2 = box(np.array(b.min) + shift, np.array(b.max) + shift)
        assert iou_aabb(a2, b2) == pytest.approx(iou_aabb(a, b), abs=1e-12)

    def test_invalid_box_rejected(self):
        with pytest.raises(ValueError):
            box([1, 0, 0], [0, 1, 1])


class TestGroundingAccuracy:
    def test_exact_predictions_score_one_everywhere(self):
        cases = [GroundingCase("q", box([i, 0, 0], [i + 1, 1, 1]), frozenset({"easy"}))
                 for i in range(4)]
        preds = [c.gt_box for c in cases]
        table = grounding_accuracy(preds, cases)
        assert all(v == 1.0 for v in table.overall.values())
        assert all(v == 1.0 for v in table.per_tag["easy"].values())

    def test_disjoint_predictions_score_zero(self):
        cases = [GroundingCase("q", box([0, 0, 0], [1, 1, 1]))] * 3
        preds = [box([9, 9, 9], [10, 10, 10])] * 3
        table = grounding_accuracy(preds, cases)
        assert all(v == 0.0 for v in table.overall.values())

    def test_crafted_set_matches_hand_count(self):
        """10 cases with hand-chosen IoUs: 0 (x4), ~0.33 (x3), 1.0 (x3).

        IoU > 0.1: 6/10; > 0.25: 6/10; > 0.5: 3/10.
        """
        gt = box([0, 0, 0], [1, 1, 1])
        away = box([5, 5, 5], [6, 6, 6])
        third = box([0.5, 0, 0], [1.5, 1, 1])  # IoU 1/3
        preds = [away] * 4 + [third] * 3 + [gt] * 3
        cases = [GroundingCase(f"q{i}", gt, frozenset({"hard"} if i < 4 else {"easy"}))
                 for i in range(10)]
        table = grounding_accuracy(preds, cases)
        assert table.overall[0.1] == pytest.approx(0.6)
        assert table.overall[0.25] == pytest.approx(0.6)
        assert table.overall[0.5] == pytest.approx(0.3)
        assert table.per_tag["hard"][0.1] == 0.0
        assert table.per_tag["easy"][0.5] == pytest.approx(0.5)
        assert table.tag_counts == {"easy": 6, "hard": 4}

    def test_strict_inequality_at_threshold(self):
        # IoU exactly at a threshold must NOT count ("exceeds" is strict);
        # 0.5 is exactly representable, so the comparison is not float-fuzzy
        gt = box([0, 0, 0], [1, 1, 1])
        pred = box([0, 0, 0], [0.5, 1, 1])  # IoU = 0.5 exactly
        table = grounding_accuracy([pred], [GroundingCase("q", gt)], thresholds=(0.5,))
        assert table.overall[0.5] == 0.0

    def test_monotone_in_threshold(self, rng):
        cases, preds = [], []
        for _ in range(50):
            mn = rng.uniform(-1, 1, size=3)
            cases.append(GroundingCase("q", box(mn, mn + rng.uniform(0.2, 1.5, size=3))))
            mn2 = mn + rng.normal(scale=0.3, size=3)
            preds.append(box(mn2, mn2 + rng.uniform(0.2, 1.5, size=3)))
        table = grounding_accuracy(preds, cases)
        accs = [table.overall[t] for t in (0.1, 0.25, 0.5)]
        assert accs[0] >= accs[1] >= accs[2]

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            grounding_accuracy([], [GroundingCase("q", box([0, 0, 0], [1, 1, 1]))])

    def test_easy_hard_exclusive(self):
        with pytest.raises(ValueError):
            GroundingCase("q", box([0, 0, 0], [1, 1, 1]), frozenset({"easy", "hard"}))


class TestRecallAt1:
    def test_all_matching(self):
        assert recall_at_1([1, 2, 3], [1, 2, 3]) == 1.0

    def test_none_matching(self):
        assert recall_at_1([1, 2, 3], [4, 5, 6]) == 0.0

    def test_half_matching(self):
        assert recall_at_1([1, 2, 3, 4], [1, 2, 9, 9]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            recall_at_1([1], [1, 2])


class TestSemsegMetrics:
    def test_perfect_prediction(self):
        labels = np.array(["a"] * 10 + ["b"] * 5, dtype=object)
        m = semseg_metrics(labels, labels, ["a", "b"])
        assert (m.macc, m.miou, m.fmiou) == (1.0, 1.0, 1.0)

    def test_balanced_swap_scores_zero(self):
        gt = np.array(["a"] * 10 + ["b"] * 10, dtype=object)
        pred = np.array(["b"] * 10 + ["a"] * 10, dtype=object)
        m = semseg_metrics(pred, gt, ["a", "b"])
        assert (m.macc, m.miou, m.fmiou) == (0.0, 0.0, 0.0)

    def test_three_class_confusion_matches_oracle(self):
        # confusion matrix: row = gt class, column = predicted class
        C = np.array([[50, 10, 0], [5, 80, 15], [0, 20, 30]])
        classes = ["a", "b", "c"]
        gt, pred = [], []
        for i in range(3):
            for j in range(3):
                gt += [classes[i]] * C[i, j]
                pred += [classes[j]] * C[i, j]
        m = semseg_metrics(np.array(pred, dtype=object), np.array(gt, dtype=object), classes)
        macc, miou, fmiou = confusion_metrics_oracle(C)
        assert m.macc == pytest.approx(macc, abs=1e-12)
        assert m.miou == pytest.approx(miou, abs=1e-12)
        assert m.fmiou == pytest.approx(fmiou, abs=1e-12)

    def test_fmiou_equals_miou_when_balanced(self, rng):
        n = 60
        gt = np.array(["a"] * n + ["b"] * n + ["c"] * n, dtype=object)
        pred = gt.copy()
        flip = rng.random(size=gt.size) < 0.3
        pred[flip] = rng.choice(np.array(["a", "b", "c"], dtype=object), size=int(flip.sum()))
        m = semseg_metrics(pred, gt, ["a", "b", "c"])
        assert m.fmiou == pytest.approx(m.miou, abs=1e-12)

    def test_absent_class_ignored(self):
        gt = np.array(["a"] * 5, dtype=object)
        pred = np.array(["a"] * 5, dtype=object)
        m = semseg_metrics(pred, gt, ["a", "never_seen"])
        assert m.miou == 1.0
        assert "never_seen" not in m.per_class

    def test_empty_gt_raises(self):
        with pytest.raises(EmptyGtError):
            semseg_metrics(np.array([], dtype=object), np.array([], dtype=object), ["a"])


class TestTransferLabels:
    def test_exact_points_inherit_labels(self, rng):
        pts = rng.normal(size=(20, 3))
        labels = np.array([f"c{i % 3}" for i in range(20)], dtype=object)
        out = transfer_labels(pts, labels, pts.copy())
        assert (out == labels).all()

    def test_distance_cap_marks_unmatched(self):
        src = np.zeros((1, 3))
        dst = np.array([[0.0, 0.0, 0.01], [0.0, 0.0, 1.0]])
        out = transfer_labels(src, np.array(["a"], dtype=object), dst, max_dist=0.05)
        assert list(out) == ["a", "unmatched"]

    def test_unmatched_count_as_errors_downstream(self):
        src = np.zeros((1, 3))
        gt_pts = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 5.0]])
        gt_labels = np.array(["a", "a"], dtype=object)
        pred = transfer_labels(src, np.array(["a"], dtype=object), gt_pts)
        m = semseg_metrics(pred, gt_labels, ["a"])
        assert m.macc == pytest.approx(0.5)
