"""Physics-consistent occlusion: splat depth vs raycast occluder depth.

The object renders through the object-centric camera; a low-poly occluder
(two boxes standing in for fingers) is raycast into a depth map from the
same viewpoint. Pixels where the occluder is closer than the splat surface
are masked out and take the background color, and the occlusion ratio is
reported per frame.
"""

import numpy as np

from splatgen import (
    Pose,
    TriangleMesh,
    composite_frame,
    look_down_z_camera,
    occlusion_mask,
    rasterize,
    raycast_depth,
    scene_stats,
)
from splatgen.imageio import write_pfm, write_png
from common import output_path, toy_object_scene


def box_mesh(center, half):
    c, h = np.asarray(center), np.asarray(half)
    v = np.array([c + h * s for s in np.array(np.meshgrid([-1, 1], [-1, 1], [-1, 1])).T.reshape(-1, 3)])
    f = np.array([
        [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5],
        [0, 4, 5], [0, 5, 1], [2, 3, 7], [2, 7, 6],
        [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
    ])
    return TriangleMesh(v, f)


scene = toy_object_scene()
stats = scene_stats(scene)
camera = look_down_z_camera(stats.centroid, 0.25, 240, 240)

render = rasterize(scene, camera)
print(f"object covers {(render.alpha >= 0.5).mean() * 100:.1f}% of the frame")

# two "fingers" between camera and object
finger1 = box_mesh(stats.centroid + [0.012, 0.0, -0.05], [0.004, 0.03, 0.004])
finger2 = box_mesh(stats.centroid + [-0.012, 0.0, -0.05], [0.004, 0.03, 0.004])
d_phys = np.minimum(
    raycast_depth(finger1, Pose.identity(), camera),
    raycast_depth(finger2, Pose.identity(), camera),
)

occ = occlusion_mask(d_phys, render)
print(f"occlusion ratio: {occ.occlusion_ratio:.3f}")

image, visible_mask = composite_frame(render, occ, (0.05, 0.05, 0.08))
write_png(output_path("occluded_frame.png"), image)
write_pfm(output_path("splat_depth.pfm"), render.depth)
print("wrote occluded_frame.png and splat_depth.pfm")
print(f"visible object pixels: {visible_mask.sum()} of {(render.alpha >= 0.5).sum()}")
