"""Pick an object's best 2D view by clustered raycasting.

Twelve cameras observe a cube from different distances; viewpoint clustering
reduces them to five representatives, and the one with the largest splatted
mask area wins.
"""

import numpy as np

from scenegrounder.geometry import CameraIntrinsics, Frame, look_at_pose
from scenegrounder.ingest import Detection
from scenegrounder.objectmap import ObjectMap
from scenegrounder.views import best_view, cluster_viewpoints, raycast_mask

INTR = CameraIntrinsics(fx=120.0, fy=120.0, cx=31.7, cy=32.3, width=64, height=64)


def cube(n=8, half=0.25):
    lin = np.linspace(-half, half, n)
    return np.stack(np.meshgrid(lin, lin, lin, indexing="ij"), axis=-1).reshape(-1, 3)


def main():
    rng = np.random.default_rng(1)
    points = cube()

    frames = {}
    for i in range(12):
        angle = 2 * np.pi * i / 12
        r = float(rng.uniform(1.0, 4.0))
        eye = [r * np.cos(angle), r * np.sin(angle), 0.8]
        frames[i] = Frame(index=i, depth=np.zeros((64, 64)),
                          pose=look_at_pose(eye, (0, 0, 0)), intrinsics=INTR)
        print(f"camera {i:2d} at range {r:.2f} m")

    positions = np.stack([frames[i].pose.camera_position for i in range(12)])
    reps = cluster_viewpoints(positions, 5)
    print(f"\nviewpoint clustering keeps representatives: {reps}")
    for ridx in reps:
        mask = raycast_mask(points, frames[ridx].pose, frames[ridx].intrinsics)
        print(f"  camera {ridx:2d}: projected area {int(mask.sum()):4d} px")

    m = ObjectMap()
    obj = m.add(Detection(confidence=1.0, descriptor=[1.0], points=points), 0)
    obj.frame_indices = list(range(12))

    bv = best_view(obj, frames)
    print(f"\nbest view: camera {bv.frame_index} with {bv.area_px} px, crop {bv.crop_box}")


if __name__ == "__main__":
    main()
