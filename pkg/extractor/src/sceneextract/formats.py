"""Writers for the scenegrounder detection-archive formats.

This package talks to the mapping engine only through files, so the formats
are restated here rather than imported:

* ``meta.json``: ``{"width", "height", "dim", "stride", "num_frames"}``
* ``frame_<idx>.det``: little-endian ``{frame_index: u32,
  num_detections: u16}`` then per detection ``{confidence: f32,
  rle_len: u32, rle: rle_len * u32, descriptor: dim * f32}`` with masks
  run-length encoded row-major, first run counting False pixels.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class ProposalRecord:
    confidence: float
    mask: np.ndarray
    descriptor: np.ndarray


def encode_mask_runs(mask: np.ndarray) -> np.ndarray:
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    edges = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], edges, [flat.size]])
    runs = np.diff(bounds)
    if flat[0]:
        runs = np.concatenate([[0], runs])
    return runs.astype(np.uint32)


def write_meta(out_dir: str | Path, width: int, height: int, dim: int, stride: int, num_frames: int):
    doc = {"width": width, "height": height, "dim": dim, "stride": stride,
           "num_frames": num_frames}
    (Path(out_dir) / "meta.json").write_text(json.dumps(doc, indent=2))


def write_frame_record(out_dir: str | Path, frame_index: int, records: list[ProposalRecord], dim: int):
    if len(records) > 0xFFFF:
        raise ValueError("num_detections exceeds u16")
    out = bytearray(struct.pack("<IH", frame_index, len(records)))
    for rec in records:
        runs = encode_mask_runs(rec.mask)
        desc = np.asarray(rec.descriptor, dtype="<f4").reshape(-1)
        if desc.size != dim:
            raise ValueError(f"descriptor dim {desc.size} != {dim}")
        out += struct.pack("<fI", float(rec.confidence), len(runs))
        out += runs.astype("<u4").tobytes()
        out += desc.tobytes()
    (Path(out_dir) / f"frame_{frame_index}.det").write_bytes(bytes(out))


def load_rgb_sequence(path: str | Path) -> list[tuple[int, Path]]:
    """Frame indices and RGB paths from a scenegrounder sequence file."""
    path = Path(path)
    data = json.loads(path.read_text())
    frames = []
    for fr in data["frames"]:
        if not fr.get("rgb_path"):
            raise ValueError(f"{path}: frame {fr.get('index')} has no rgb_path")
        frames.append((int(fr["index"]), path.parent / fr["rgb_path"]))
    return frames
