"""Binary map checkpoints and per-object PLY export.

Checkpoint layout (all little-endian)::

    magic "SGMP" | version u32 | config_len u32 | config JSON (utf-8)
    | dim u32 | num_objects u32
    | per object: id u32, num_detections u32, n_frames u32,
                  frame_indices n_frames*u32, descriptor dim*f32,
                  n_points u32, points n_points*3*f32

The config snapshot is serialized with sorted keys so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .objectmap import AssociationConfig, MapObject, ObjectMap

MAGIC = b"SGMP"
VERSION = 1


def config_snapshot(config: AssociationConfig) -> str:
    return json.dumps(dataclasses.asdict(config), sort_keys=True, separators=(",", ":"))


def save_checkpoint(path: str | Path, map: ObjectMap, config: AssociationConfig, dim: int | None = None):
    objects = sorted(map.objects.values(), key=lambda o: o.id)
    if dim is None:
        dim = objects[0].descriptor.size if objects else 0
    cfg = config_snapshot(config).encode("utf-8")
    out = bytearray(MAGIC)
    out += struct.pack("<III", VERSION, len(cfg), dim)
    out += cfg
    out += struct.pack("<I", len(objects))
    for obj in objects:
        frames = np.asarray(sorted(obj.frame_indices), dtype="<u4")
        out += struct.pack("<III", obj.id, obj.num_detections, len(frames))
        out += frames.tobytes()
        out += np.asarray(obj.descriptor, dtype="<f4").tobytes()
        pts = np.ascontiguousarray(obj.points, dtype="<f4")
        out += struct.pack("<I", pts.shape[0])
        out += pts.tobytes()
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path: str | Path) -> tuple[ObjectMap, dict]:
    """Read a checkpoint; returns the map and the stored config dict."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise SchemaError(f"{path}: not a map checkpoint (bad magic)")
    try:
        version, cfg_len, dim = struct.unpack_from("<III", raw, 4)
        if version != VERSION:
            raise SchemaError(f"{path}: unsupported checkpoint version {version}")
        off = 16
        config = json.loads(raw[off : off + cfg_len].decode("utf-8"))
        off += cfg_len
        (n_objects,) = struct.unpack_from("<I", raw, off)
        off += 4
        map = ObjectMap()
        max_id = -1
        for _ in range(n_objects):
            oid, num_det, n_frames = struct.unpack_from("<III", raw, off)
            off += 12
            frames = np.frombuffer(raw, dtype="<u4", count=n_frames, offset=off)
            off += 4 * n_frames
            desc = np.frombuffer(raw, dtype="<f4", count=dim, offset=off)
            off += 4 * dim
            (n_points,) = struct.unpack_from("<I", raw, off)
            off += 4
            pts = np.frombuffer(raw, dtype="<f4", count=3 * n_points, offset=off).reshape(-1, 3)
            off += 12 * n_points
            obj = MapObject(
                id=int(oid),
                points=np.array(pts),
                descriptor=np.array(desc, dtype=np.float64),
                num_detections=int(num_det),
                frame_indices=[int(f) for f in frames],
            )
            map.objects[obj.id] = obj
            max_id = max(max_id, obj.id)
        if off != len(raw):
            raise SchemaError(f"{path}: {len(raw) - off} trailing bytes")
        map._next_id = max_id + 1
    except (struct.error, ValueError) as err:
        raise SchemaError(f"{path}: corrupt checkpoint: {err}")
    return map, config


def _palette_color(index: int) -> tuple[int, int, int]:
    """Deterministic distinct-ish color per object id (golden-ratio hue walk)."""
    h = (index * 0.61803398875) % 1.0
    i = int(h * 6.0)
    f = h * 6.0 - i
    p, q, t = 0.25, 1.0 - 0.75 * f, 0.25 + 0.75 * f
    rgb = [(1, t, p), (q, 1, p), (p, 1, t), (p, q, 1), (t, p, 1), (1, p, q)][i % 6]
    return tuple(int(round(255 * c)) for c in rgb)


def export_ply(map: ObjectMap, out_dir: str | Path) -> list[Path]:
    """Write one colored ASCII PLY per object; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for obj in sorted(map.objects.values(), key=lambda o: o.id):
        r, g, b = _palette_color(obj.id)
        path = out_dir / f"object_{obj.id}.ply"
        with path.open("w") as fh:
            fh.write(
                "ply\nformat ascii 1.0\n"
                f"element vertex {obj.points.shape[0]}\n"
                "property float x\nproperty float y\nproperty float z\n"
                "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                "end_header\n"
            )
            for x, y, z in obj.points:
                fh.write(f"{x:.6f} {y:.6f} {z:.6f} {r} {g} {b}\n")
        paths.append(path)
    return paths
