from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

W, H = 64, 48


def toy_rgb(rects):
    """Black canvas with filled color rectangles: (y0, y1, x0, x1, rgb)."""
    img = np.zeros((H, W, 3), dtype=np.uint8)
    for y0, y1, x0, x1, color in rects:
        img[y0:y1, x0:x1] = color
    return img


FRAME_RECTS = {
    0: [(8, 24, 6, 22, (220, 30, 30)), (10, 26, 38, 56, (30, 30, 220))],
    1: [(9, 25, 8, 24, (220, 30, 30)), (11, 27, 36, 54, (30, 30, 220))],
    2: [(10, 26, 10, 26, (220, 30, 30)), (12, 28, 34, 52, (30, 30, 220))],
}


@pytest.fixture
def toy_sequence(tmp_path):
    """3-frame toy RGB sequence on disk; returns the sequence JSON path."""
    seq_dir = tmp_path / "seq"
    seq_dir.mkdir()
    frames = []
    for index, rects in FRAME_RECTS.items():
        Image.fromarray(toy_rgb(rects)).save(seq_dir / f"rgb_{index}.png")
        frames.append({
            "index": index,
            "pose": [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0],
            "depth_path": f"depth_{index}.png",
            "rgb_path": f"rgb_{index}.png",
        })
    doc = {
        "intrinsics": {"fx": 50.0, "fy": 50.0, "cx": 31.5, "cy": 23.5, "width": W, "height": H},
        "frames": frames,
    }
    path = seq_dir / "sequence.json"
    path.write_text(json.dumps(doc))
    return path
