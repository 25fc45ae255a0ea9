"""Scene IO: write a splat cloud to binary PLY, read it back, inspect stats.

The on-disk layout is the common 3DGS point-cloud PLY: per-vertex position,
DC and higher-order SH coefficients, opacity logit, log scales, and a
(w,x,y,z) rotation quaternion, all float32 little-endian.
"""

import numpy as np

from splatgen import load_ply, save_ply, scene_stats
from common import output_path, toy_object_scene

scene = toy_object_scene()
print(f"built a synthetic object with {scene.count} Gaussians")

path = output_path("toy_object.ply")
save_ply(scene, path)
print(f"saved -> {path}")

loaded = load_ply(path)
for field in ("positions", "rotations", "log_scales", "opacity_logits", "sh0", "sh_rest"):
    assert np.array_equal(getattr(scene, field), getattr(loaded, field)), field
print("round trip is exact on every buffer")

stats = scene_stats(loaded)
size_mm = (stats.aabb_max - stats.aabb_min) * 1000
print(f"AABB size: {size_mm.round(1)} mm, centroid: {(stats.centroid * 1000).round(2)} mm")
