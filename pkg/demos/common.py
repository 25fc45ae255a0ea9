"""Shared helpers for the demo scripts: synthetic scenes and output paths."""

import os

import numpy as np

from splatgen import Stream, make_scene

OUTPUT_DIR = os.path.join(os.path.dirname(__file__), "output")


def output_path(*parts):
    os.makedirs(OUTPUT_DIR, exist_ok=True)
    return os.path.join(OUTPUT_DIR, *parts)


def toy_object_scene(n=4000, seed=0):
    """A colorful blobby 'object': three overlapping Gaussian shells.

    Stands in for an optimized splat reconstruction so the demos run
    without any external assets.
    """
    rng = Stream(seed)
    per = n // 3
    centers = np.array([[0.0, 0.0, 0.0], [0.025, 0.01, 0.0], [-0.02, 0.015, 0.01]])
    base_colors = np.array([[1.2, -0.6, -0.6], [-0.6, 1.0, -0.2], [-0.4, -0.4, 1.4]])
    positions, sh0 = [], []
    for c, col in zip(centers, base_colors):
        dirs = rng.normal(size=(per, 3))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        radii = rng.uniform(0.012, 0.02, size=(per, 1))
        positions.append(c + dirs * radii)
        sh0.append(np.tile(col, (per, 1)) + rng.uniform(-0.15, 0.15, size=(per, 3)))
    positions = np.vstack(positions)
    sh0 = np.vstack(sh0)
    n = positions.shape[0]

    u = rng.uniform(size=(n, 3))
    a, b = np.sqrt(1.0 - u[:, 0]), np.sqrt(u[:, 0])
    quats = np.stack(
        [
            b * np.cos(2 * np.pi * u[:, 2]),
            a * np.sin(2 * np.pi * u[:, 1]),
            a * np.cos(2 * np.pi * u[:, 1]),
            b * np.sin(2 * np.pi * u[:, 2]),
        ],
        axis=1,
    )
    log_scales = np.log(rng.uniform(0.0015, 0.004, size=(n, 3)))
    opacity = rng.uniform(2.0, 7.0, size=n)
    sh_rest = rng.uniform(-0.08, 0.08, size=(n, 45))
    return make_scene(positions, quats, log_scales, opacity, sh0, sh_rest)
