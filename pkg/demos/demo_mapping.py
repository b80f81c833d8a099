"""Build an object-centric 3D map from a synthetic posed RGB-D sequence.

Walks through the full ingestion path: a camera orbits two small objects,
each frame contributes mask proposals that get filtered, back-projected,
denoised and associated into persistent map objects. Outputs land in
./demo_output/mapping/.
"""

from pathlib import Path

import numpy as np

from scenegrounder.checkpoint import export_ply, save_checkpoint
from scenegrounder.geometry import CameraIntrinsics, Frame, look_at_pose, project_points_to_pixels
from scenegrounder.ingest import FilterConfig, lift_frame_detections
from scenegrounder.objectmap import AssociationConfig, ObjectMap, integrate_frame, postprocess

OUT = Path(__file__).parent / "demo_output" / "mapping"

W, H = 96, 72
INTR = CameraIntrinsics(fx=80.0, fy=80.0, cx=47.5, cy=35.5, width=W, height=H)

# two box-shaped objects sitting on the floor
OBJECTS = {
    "crate": {"center": np.array([0.0, 0.0, 0.3]), "half": 0.3, "descriptor_axis": 0},
    "bin": {"center": np.array([1.4, 0.6, 0.25]), "half": 0.25, "descriptor_axis": 1},
}


def object_surface(center, half, n=14):
    """Points on the top + two visible faces of a box."""
    lin = np.linspace(-half, half, n)
    gx, gy = np.meshgrid(lin, lin)
    top = np.stack([gx, gy, np.full_like(gx, half)], axis=-1).reshape(-1, 3)
    front = np.stack([gx, np.full_like(gx, -half), gy], axis=-1).reshape(-1, 3)
    side = np.stack([np.full_like(gx, -half), gx, gy], axis=-1).reshape(-1, 3)
    return np.concatenate([top, front, side]) + center


def render_frame(index, eye):
    """Depth + per-object masks via splatting the known geometry (a stand-in
    for a real RGB-D sensor and mask-proposal model)."""
    pose = look_at_pose(eye, (0.7, 0.3, 0.3))
    depth = np.zeros((H, W))
    masks = {}
    for name, spec in OBJECTS.items():
        pts = object_surface(spec["center"], spec["half"])
        uv, z = project_points_to_pixels(pts, pose, INTR)
        keep = (z > 0) & (uv[:, 0] >= 0) & (uv[:, 0] < W) & (uv[:, 1] >= 0) & (uv[:, 1] < H)
        ui = np.floor(uv[keep, 0] + 0.5).astype(int)
        vi = np.floor(uv[keep, 1] + 0.5).astype(int)
        mask = np.zeros((H, W), dtype=bool)
        mask[vi, ui] = True
        # nearest surface wins the depth buffer
        for u, v, zz in zip(ui, vi, z[keep]):
            if depth[v, u] == 0 or zz < depth[v, u]:
                depth[v, u] = zz
        masks[name] = mask
    frame = Frame(index=index, depth=depth, pose=pose, intrinsics=INTR)
    return frame, masks


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)

    filter_cfg = FilterConfig(min_confidence=0.5, min_mask_px=30, max_mask_fraction=0.8,
                              dbscan_eps=0.15, dbscan_min_pts=4)
    assoc_cfg = AssociationConfig(post_min_points=50, post_min_detections=3)
    map = ObjectMap()

    print("integrating 12 orbit frames ...")
    for i in range(12):
        angle = 2 * np.pi * i / 12
        eye = np.array([0.7 + 2.5 * np.cos(angle), 0.3 + 2.5 * np.sin(angle), 1.6])
        frame, masks = render_frame(i, eye)

        proposals = []
        for name, mask in masks.items():
            d = np.zeros(8)
            d[OBJECTS[name]["descriptor_axis"]] = 1.0
            d += rng.normal(scale=0.02, size=8)  # simulated descriptor noise
            proposals.append((mask, 0.95, d))
        detections = lift_frame_detections(frame, proposals, filter_cfg, subsample_stride=1)
        integrate_frame(map, detections, i, assoc_cfg)
        print(f"  frame {i:2d}: {len(detections)} detections -> {len(map)} map objects")

    postprocess(map, assoc_cfg)
    print(f"after postprocess: {len(map)} objects")
    for obj in map:
        print(f"  object {obj.id}: {obj.points.shape[0]} points, "
              f"{obj.num_detections} detections, extent {np.round(obj.extent, 2)}")

    save_checkpoint(OUT / "map.sgmp", map, assoc_cfg, dim=8)
    paths = export_ply(map, OUT / "ply")
    print(f"checkpoint + {len(paths)} PLY files in {OUT}")


if __name__ == "__main__":
    main()
