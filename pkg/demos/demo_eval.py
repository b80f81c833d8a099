"""Evaluation metrics walkthrough: box-IoU grounding accuracy, Recall@1 and
the semantic-segmentation triple (mAcc / mIoU / fmIoU)."""

import numpy as np

from scenegrounder.metrics import (
    Aabb3,
    GroundingCase,
    grounding_accuracy,
    iou_aabb,
    recall_at_1,
    semseg_metrics,
    transfer_labels,
)


def main():
    # --- box IoU ---------------------------------------------------------
    gt = Aabb3((0, 0, 0), (1, 1, 1))
    shifted = Aabb3((0.5, 0, 0), (1.5, 1, 1))
    print(f"unit cube vs itself:        IoU = {iou_aabb(gt, gt):.3f}")
    print(f"unit cube shifted by 0.5 m: IoU = {iou_aabb(gt, shifted):.3f}")

    # --- grounding accuracy table ---------------------------------------
    cases = [
        GroundingCase("the chair", gt, frozenset({"easy"})),
        GroundingCase("the chair behind the desk", gt, frozenset({"hard", "view_dep"})),
        GroundingCase("the lamp", Aabb3((3, 3, 0), (4, 4, 2)), frozenset({"easy"})),
    ]
    predictions = [gt, shifted, Aabb3((8, 8, 8), (9, 9, 9))]
    table = grounding_accuracy(predictions, cases)
    print("\nAcc@tau (IoU strictly exceeds tau):")
    for thr, acc in table.overall.items():
        print(f"  overall A@{thr:<5} = {acc:.3f}")
    for tag, row in table.per_tag.items():
        print(f"  {tag:<10} A@0.25 = {row[0.25]:.3f}  (n={table.tag_counts[tag]})")
    print(f"Recall@1 = {recall_at_1([4, 1, 7], [4, 2, 7]):.3f}")

    # --- semantic segmentation ------------------------------------------
    rng = np.random.default_rng(0)
    gt_labels = np.array(["floor"] * 500 + ["chair"] * 100 + ["table"] * 200, dtype=object)
    pred_labels = gt_labels.copy()
    flip = rng.random(size=gt_labels.size) < 0.15
    pred_labels[flip] = rng.choice(np.array(["floor", "chair", "table"], dtype=object),
                                   size=int(flip.sum()))
    m = semseg_metrics(pred_labels, gt_labels, ["floor", "chair", "table"])
    print(f"\nsemseg: mAcc={m.macc:.3f}  mIoU={m.miou:.3f}  fmIoU={m.fmiou:.3f}")
    for cls, row in m.per_class.items():
        print(f"  {cls:<6} acc={row['acc']:.3f} iou={row['iou']:.3f} gt_points={row['gt_points']}")

    # --- label transfer between clouds ----------------------------------
    src = rng.uniform(0, 1, size=(300, 3))
    src_labels = np.array(["a"] * 150 + ["b"] * 150, dtype=object)
    dst = src + rng.normal(scale=0.01, size=src.shape)
    moved = transfer_labels(src, src_labels, dst, max_dist=0.05)
    agree = float((moved == src_labels).mean())
    print(f"\nnearest-neighbor label transfer agreement: {agree:.3f}")


if __name__ == "__main__":
    main()
