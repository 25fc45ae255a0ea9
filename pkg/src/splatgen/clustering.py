"""Grouping Gaussians for structured appearance perturbation.

Spatial clusters (k-means over positions, default 64) mimic localized
effects like shadows and wear; color clusters (k-means over the DC SH
coefficients, default 32) group photometrically similar material regions.
Both are preprocessing: each scene is clustered once and the assignments are
reused for every augmented frame.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import Stream
from .scene import GaussianScene, scene_digest

DEFAULT_SPATIAL_K = 64
DEFAULT_COLOR_K = 32


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    labels: np.ndarray  # (N,) int32 in [0, k)
    centroids: np.ndarray  # (k, D)
    inertia: float

    @staticmethod
    def per_point(n: int) -> "ClusterAssignment":
        """Every point its own cluster (random-noise augmentation group)."""
        return ClusterAssignment(n, np.arange(n, dtype=np.int32), np.zeros((n, 0)), 0.0)

    @staticmethod
    def whole_scene(n: int) -> "ClusterAssignment":
        """One cluster covering the scene (global-shift augmentation group)."""
        return ClusterAssignment(1, np.zeros(n, dtype=np.int32), np.zeros((1, 0)), 0.0)


def _pairwise_sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # |p - c|^2 expansion; cheaper than materializing (N, k, D)
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + (centroids * centroids).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeanspp_init(points: np.ndarray, k: int, rng: Stream) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            # inverse-CDF sample proportional to squared distance
            u = rng.uniform() * total
            idx = int(np.searchsorted(np.cumsum(d2), u))
            idx = min(idx, n - 1)
        centroids[j] = points[idx]
        np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1), out=d2)
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int, max_iter: int = 100, tol: float = 1e-6) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ seeding from a SplitMix64 stream.

    Deterministic for identical (points, k, seed). Empty clusters are
    re-seeded to the point currently farthest from its assigned centroid;
    k is clamped to the point count. Convergence: max centroid displacement
    <= tol * data bounding-box diagonal.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
        raise ValidationError("kmeans needs an (N>=1, D>=1) point array")
    if not np.all(np.isfinite(points)):
        raise ValidationError("kmeans input contains non-finite values")
    if k < 1:
        raise ValidationError("kmeans needs k >= 1")
    n = points.shape[0]
    k = min(k, n)
    rng = Stream(seed)

    centroids = _kmeanspp_init(points, k, rng)
    span = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    move_tol = tol * max(span, 1e-300)

    labels = np.zeros(n, dtype=np.int32)
    for _ in range(max_iter):
        d2 = _pairwise_sq_dists(points, centroids)
        labels = d2.argmin(axis=1).astype(np.int32)

        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            # farthest-point repair, excluding points already consumed
            dist_to_own = d2[np.arange(n), labels].copy()
            for j in empty:
                far = int(dist_to_own.argmax())
                centroids[j] = points[far]
                dist_to_own[far] = -1.0
            d2 = _pairwise_sq_dists(points, centroids)
            labels = d2.argmin(axis=1).astype(np.int32)
            counts = np.bincount(labels, minlength=k)

        new_centroids = np.empty_like(centroids)
        for d in range(points.shape[1]):
            new_centroids[:, d] = np.bincount(labels, weights=points[:, d], minlength=k)
        new_centroids /= np.maximum(counts, 1)[:, None]

        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if movement <= move_tol:
            break

    d2 = _pairwise_sq_dists(points, centroids)
    labels = d2.argmin(axis=1).astype(np.int32)
    # direct differences: exact zero when every point sits on its centroid
    inertia = float(((points - centroids[labels]) ** 2).sum())
    return ClusterAssignment(k=k, labels=labels, centroids=centroids, inertia=inertia)


def spatial_clusters(scene: GaussianScene, k: int = DEFAULT_SPATIAL_K, seed: int = 0) -> ClusterAssignment:
    return kmeans(scene.positions, k, seed)


def color_clusters(scene: GaussianScene, k: int = DEFAULT_COLOR_K, seed: int = 0) -> ClusterAssignment:
    return kmeans(scene.sh0, k, seed)


def cached_clusters(
    scene: GaussianScene,
    kind: str,
    k: int,
    seed: int,
    cache_dir,
    digest: str | None = None,
) -> ClusterAssignment:
    """Sidecar-cached clustering keyed by scene content hash + (kind, k, seed)."""
    if kind == "spatial":
        compute = spatial_clusters
    elif kind == "color":
        compute = color_clusters
    else:
        raise ValidationError(f"unknown cluster kind '{kind}'")
    digest = digest or scene_digest(scene)
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"{digest[:16]}_{kind}_k{k}_s{seed}.npz")
    if os.path.exists(path):
        with np.load(path) as z:
            if str(z["digest"]) == digest:
                return ClusterAssignment(
                    int(z["k"]), z["labels"], z["centroids"], float(z["inertia"])
                )
    assignment = compute(scene, k=k, seed=seed)
    np.savez(
        path,
        digest=digest,
        kind=kind,
        seed=seed,
        k=assignment.k,
        labels=assignment.labels,
        centroids=assignment.centroids,
        inertia=assignment.inertia,
    )
    return assignment
