"""Detection-archive and RGB-D sequence file formats.

An archive directory holds ``meta.json`` plus one record per frame:

* ``meta.json``: ``{"width", "height", "dim", "stride", "num_frames"}``
* ``frame_<idx>.det``: little-endian binary — header ``{frame_index: u32,
  num_detections: u16}`` then per detection ``{confidence: f32,
  rle_len: u32, rle: rle_len * u32, descriptor: dim * f32}``.
* ``frame_<idx>.det.json``: accepted debug variant with identical field
  names; ``rle`` and ``descriptor`` are base64 of the little-endian u32/f32
  arrays.

Masks are run-length encoded over the row-major flattened array, runs
alternating False/True and starting with the (possibly zero-length) False
run.

A sequence file is one JSON document::

    {"intrinsics": {"fx", "fy", "cx", "cy", "width", "height"},
     "frames": [{"index", "pose": [12 floats row-major [R|t]],
                 "depth_path", "rgb_path"?}]}

with depth stored as 16-bit PNG millimeters next to it.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import SchemaError
from .geometry import CameraIntrinsics, Frame, Pose

META_KEYS = {"width", "height", "dim", "stride", "num_frames"}


def rle_encode(mask: np.ndarray) -> np.ndarray:
    """Run lengths (u32) of the row-major flattened mask, starting with False."""
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    if flat.size == 0:
        raise ValueError("cannot encode an empty mask")
    edges = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], edges, [flat.size]])
    runs = np.diff(bounds)
    if flat[0]:
        runs = np.concatenate([[0], runs])
    return runs.astype(np.uint32)


def rle_decode(runs: np.ndarray, height: int, width: int) -> np.ndarray:
    """Inverse of :func:`rle_encode`; validates that runs cover H*W pixels."""
    runs = np.asarray(runs, dtype=np.int64)
    if (runs < 0).any():
        raise SchemaError("rle: negative run length")
    total = int(runs.sum())
    if total != height * width:
        raise SchemaError(f"rle covers {total} pixels, expected {height * width}")
    values = np.arange(len(runs)) % 2 == 1
    flat = np.repeat(values, runs)
    return flat.reshape(height, width)


@dataclass
class ArchiveMeta:
    width: int
    height: int
    dim: int
    stride: int
    num_frames: int


@dataclass
class DetectionRecord:
    """One archived proposal: mask + confidence + pooled descriptor."""

    confidence: float
    mask: np.ndarray
    descriptor: np.ndarray


def load_meta(archive_dir: str | Path) -> ArchiveMeta:
    path = Path(archive_dir) / "meta.json"
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise SchemaError(f"{path}: missing meta.json")
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not valid JSON: {err}")
    missing = META_KEYS - data.keys()
    if missing:
        raise SchemaError(f"{path}: missing keys {sorted(missing)}")
    unknown = data.keys() - META_KEYS
    if unknown:
        raise SchemaError(f"{path}: unknown keys {sorted(unknown)}")
    return ArchiveMeta(**{k: int(data[k]) for k in META_KEYS})


def save_meta(archive_dir: str | Path, meta: ArchiveMeta):
    path = Path(archive_dir) / "meta.json"
    path.write_text(
        json.dumps(
            {
                "width": meta.width,
                "height": meta.height,
                "dim": meta.dim,
                "stride": meta.stride,
                "num_frames": meta.num_frames,
            },
            indent=2,
        )
    )


def _frame_paths(archive_dir: Path, frame_index: int) -> tuple[Path, Path]:
    return (
        archive_dir / f"frame_{frame_index}.det",
        archive_dir / f"frame_{frame_index}.det.json",
    )


def save_frame_record(archive_dir: str | Path, frame_index: int, records: list[DetectionRecord], meta: ArchiveMeta):
    """Write the binary per-frame record."""
    if len(records) > 0xFFFF:
        raise ValueError("num_detections exceeds u16")
    out = bytearray(struct.pack("<IH", frame_index, len(records)))
    for rec in records:
        runs = rle_encode(rec.mask)
        desc = np.asarray(rec.descriptor, dtype="<f4").reshape(-1)
        if desc.size != meta.dim:
            raise ValueError(f"descriptor dim {desc.size} != meta dim {meta.dim}")
        out += struct.pack("<fI", float(rec.confidence), len(runs))
        out += runs.astype("<u4").tobytes()
        out += desc.tobytes()
    (Path(archive_dir) / f"frame_{frame_index}.det").write_bytes(bytes(out))


def _load_binary_record(path: Path, meta: ArchiveMeta) -> tuple[int, list[DetectionRecord]]:
    raw = path.read_bytes()
    try:
        frame_index, n = struct.unpack_from("<IH", raw, 0)
        off = 6
        records = []
        for _ in range(n):
            confidence, rle_len = struct.unpack_from("<fI", raw, off)
            off += 8
            runs = np.frombuffer(raw, dtype="<u4", count=rle_len, offset=off)
            off += 4 * rle_len
            desc = np.frombuffer(raw, dtype="<f4", count=meta.dim, offset=off)
            off += 4 * meta.dim
            mask = rle_decode(runs, meta.height, meta.width)
            records.append(DetectionRecord(float(confidence), mask, np.array(desc)))
        if off != len(raw):
            raise SchemaError(f"{path}: {len(raw) - off} trailing bytes")
    except (struct.error, ValueError) as err:
        raise SchemaError(f"{path}: corrupt record: {err}")
    return frame_index, records


def _load_json_record(path: Path, meta: ArchiveMeta) -> tuple[int, list[DetectionRecord]]:
    try:
        data = json.loads(path.read_text())
        frame_index = int(data["frame_index"])
        listed = data["detections"]
        if int(data["num_detections"]) != len(listed):
            raise SchemaError(f"{path}: num_detections != len(detections)")
        records = []
        for det in listed:
            runs = np.frombuffer(base64.b64decode(det["rle"]), dtype="<u4")
            if int(det["rle_len"]) != len(runs):
                raise SchemaError(f"{path}: rle_len mismatch")
            desc = np.frombuffer(base64.b64decode(det["descriptor"]), dtype="<f4")
            if desc.size != meta.dim:
                raise SchemaError(f"{path}: descriptor dim {desc.size} != {meta.dim}")
            mask = rle_decode(runs, meta.height, meta.width)
            records.append(DetectionRecord(float(det["confidence"]), mask, np.array(desc)))
    except (KeyError, ValueError, json.JSONDecodeError) as err:
        raise SchemaError(f"{path}: corrupt record: {err}")
    return frame_index, records


def save_frame_record_json(archive_dir: str | Path, frame_index: int, records: list[DetectionRecord]):
    """Write the JSON+base64 debug variant."""
    dets = []
    for rec in records:
        runs = rle_encode(rec.mask).astype("<u4")
        dets.append(
            {
                "confidence": float(rec.confidence),
                "rle_len": int(len(runs)),
                "rle": base64.b64encode(runs.tobytes()).decode("ascii"),
                "descriptor": base64.b64encode(
                    np.asarray(rec.descriptor, dtype="<f4").tobytes()
                ).decode("ascii"),
            }
        )
    doc = {"frame_index": frame_index, "num_detections": len(dets), "detections": dets}
    (Path(archive_dir) / f"frame_{frame_index}.det.json").write_text(json.dumps(doc))


def load_frame_record(archive_dir: str | Path, frame_index: int, meta: ArchiveMeta) -> list[DetectionRecord]:
    """Load one frame's detection records, preferring the binary file."""
    binary, debug = _frame_paths(Path(archive_dir), frame_index)
    if binary.exists():
        stored_index, records = _load_binary_record(binary, meta)
    elif debug.exists():
        stored_index, records = _load_json_record(debug, meta)
    else:
        raise SchemaError(f"{binary}: no record for frame {frame_index}")
    if stored_index != frame_index:
        raise SchemaError(f"{binary.name}: header frame_index {stored_index} != {frame_index}")
    return records


# ---------------------------------------------------------------------------
# posed RGB-D sequences


def save_depth_png(path: str | Path, depth_m: np.ndarray):
    """Store metric depth as 16-bit PNG millimeters (0 = invalid)."""
    mm = np.clip(np.round(np.asarray(depth_m, dtype=np.float64) * 1000.0), 0, 65535)
    Image.fromarray(mm.astype(np.uint16)).save(str(path))


def load_depth_png(path: str | Path) -> np.ndarray:
    arr = np.asarray(Image.open(str(path)))
    return arr.astype(np.float64) / 1000.0


@dataclass
class SequenceFrameRef:
    index: int
    pose: Pose
    depth_path: Path
    rgb_path: Path | None


@dataclass
class Sequence:
    """Parsed sequence file: shared intrinsics plus per-frame pose and paths."""

    intrinsics: CameraIntrinsics
    frames: list[SequenceFrameRef]

    def load_frame(self, ref: SequenceFrameRef) -> Frame:
        depth = load_depth_png(ref.depth_path)
        rgb = None
        if ref.rgb_path is not None:
            rgb = np.asarray(Image.open(str(ref.rgb_path)).convert("RGB"))
        return Frame(index=ref.index, depth=depth, pose=ref.pose, intrinsics=self.intrinsics, rgb=rgb)


def load_sequence(path: str | Path) -> Sequence:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (FileNotFoundError, json.JSONDecodeError) as err:
        raise SchemaError(f"{path}: {err}")
    base = path.parent
    try:
        intr = data["intrinsics"]
        intrinsics = CameraIntrinsics(
            fx=float(intr["fx"]),
            fy=float(intr["fy"]),
            cx=float(intr["cx"]),
            cy=float(intr["cy"]),
            width=int(intr["width"]),
            height=int(intr["height"]),
        )
        frames = []
        for fr in data["frames"]:
            pose_vals = fr["pose"]
            if len(pose_vals) != 12:
                raise SchemaError(f"{path}: frame {fr.get('index')}: pose must have 12 floats")
            rgb_path = base / fr["rgb_path"] if fr.get("rgb_path") else None
            frames.append(
                SequenceFrameRef(
                    index=int(fr["index"]),
                    pose=Pose.from_flat(pose_vals),
                    depth_path=base / fr["depth_path"],
                    rgb_path=rgb_path,
                )
            )
    except (KeyError, TypeError, ValueError) as err:
        raise SchemaError(f"{path}: bad sequence schema: {err}")
    indices = [f.index for f in frames]
    if len(set(indices)) != len(indices):
        raise SchemaError(f"{path}: duplicate frame indices")
    return Sequence(intrinsics=intrinsics, frames=frames)


def save_sequence(path: str | Path, intrinsics: CameraIntrinsics, frames: list[dict]):
    """Write a sequence file; ``frames`` items carry index/pose/depth_path[/rgb_path]."""
    doc = {
        "intrinsics": {
            "fx": intrinsics.fx,
            "fy": intrinsics.fy,
            "cx": intrinsics.cx,
            "cy": intrinsics.cy,
            "width": intrinsics.width,
            "height": intrinsics.height,
        },
        "frames": frames,
    }
    Path(path).write_text(json.dumps(doc, indent=2))
