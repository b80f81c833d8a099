"""File-based pipeline end to end through the CLI.

Writes a tiny synthetic sequence + detection archive to disk, then drives
the stages exactly the way a shell user would:

    scenegrounder map       -> map checkpoint + run manifest
    scenegrounder graph     -> scene-graph JSON + best-view sidecar
    scenegrounder ground    -> grounded answer + LLM transcript
    scenegrounder export-ply

Every stage boundary is a file, so any stage can be replaced by a third
party that honors the formats.
"""

import json
from pathlib import Path

import numpy as np

from scenegrounder import archive, cli
from scenegrounder.geometry import CameraIntrinsics, Pose

OUT = Path(__file__).parent / "demo_output" / "cli"
W, H, DIM = 64, 48, 4


def write_inputs():
    seq_dir = OUT / "seq"
    det_dir = OUT / "det"
    seq_dir.mkdir(parents=True, exist_ok=True)
    det_dir.mkdir(parents=True, exist_ok=True)

    intr = CameraIntrinsics(fx=50.0, fy=50.0, cx=31.5, cy=23.5, width=W, height=H)
    frames = []
    for i, dx in enumerate((-0.05, 0.0, 0.05)):
        archive.save_depth_png(seq_dir / f"depth_{i}.png", np.full((H, W), 2.0))
        frames.append({"index": i, "pose": Pose(np.eye(3), np.array([dx, 0, 0])).to_flat(),
                       "depth_path": f"depth_{i}.png"})
    archive.save_sequence(seq_dir / "sequence.json", intr, frames)

    meta = archive.ArchiveMeta(width=W, height=H, dim=DIM, stride=2, num_frames=3)
    archive.save_meta(det_dir, meta)
    mask_a = np.zeros((H, W), dtype=bool)
    mask_a[10:22, 8:20] = True
    mask_b = np.zeros((H, W), dtype=bool)
    mask_b[12:24, 40:52] = True
    for i in range(3):
        archive.save_frame_record(det_dir, i, [
            archive.DetectionRecord(0.9, mask_a, np.array([1, 0, 0, 0], dtype=np.float32)),
            archive.DetectionRecord(0.9, mask_b, np.array([0, 1, 0, 0], dtype=np.float32)),
        ], meta)

    (OUT / "captions.json").write_text(json.dumps({"0": "red crate", "1": "blue bin"}))
    (OUT / "config.yaml").write_text(
        "filter: {min_mask_px: 20, dbscan_eps: 0.3, dbscan_min_pts: 3}\n"
        "association: {post_min_points: 10, post_min_detections: 2}\n"
    )
    return seq_dir / "sequence.json", det_dir


def run(argv):
    print(f"\n$ scenegrounder {' '.join(str(a) for a in argv)}")
    code = cli.main([str(a) for a in argv])
    assert code == 0, f"exit code {code}"


def main():
    seq, det = write_inputs()
    ckpt = OUT / "map.sgmp"
    run(["map", "--sequence", seq, "--detections", det, "--output", ckpt,
         "--manifest", OUT / "manifest.json", "--config", OUT / "config.yaml"])
    print(json.dumps(json.loads((OUT / "manifest.json").read_text())["object_counts"], indent=2))

    graph_json = OUT / "graph.json"
    run(["graph", "--checkpoint", ckpt, "--sequence", seq, "--output", graph_json,
         "--captions", OUT / "captions.json", "--views-out", OUT / "views.json",
         "--config", OUT / "config.yaml"])
    print(graph_json.read_text())

    run(["ground", "--graph", graph_json, "--query", "the red crate near the blue bin",
         "--endpoint", "mock", "--output", OUT / "answer.json",
         "--transcript", OUT / "transcript.jsonl"])

    run(["export-ply", "--checkpoint", ckpt, "--output-dir", OUT / "ply"])
    print(f"\nartifacts in {OUT}")


if __name__ == "__main__":
    main()
