"""Physics-consistent occlusion: mesh depth raycasting and RGB masking.

Occluder geometry (e.g. the hand) is raycast into a depth map from the
original viewpoint; object pixels whose splat depth lies behind it are
masked out and filled with the background, so the image agrees with the
simulated scene state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .errors import SchemaError, ValidationError
from .render import DEPTH_VALID_THRESHOLD, RenderOutput
from .transforms import Pose

_DEGENERATE_AREA = 1e-12  # m^2
_RAY_EPS = 1e-9


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) meters
    triangles: np.ndarray  # (T, 3) vertex indices

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.shape[0] < 1:
            raise ValidationError("mesh has no triangles")
        if not np.all(np.isfinite(v)):
            raise ValidationError("mesh has non-finite vertices")
        if t.min() < 0 or t.max() >= v.shape[0]:
            raise ValidationError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)


@dataclass(frozen=True)
class OcclusionResult:
    mask: np.ndarray  # (H, W) bool; True where occluder depth is in front
    occlusion_ratio: float  # masked object pixels / object pixels


def _parse_face_token(token: str, n_vertices: int, lineno: int) -> int:
    idx_str = token.split("/")[0]
    try:
        idx = int(idx_str)
    except ValueError as e:
        raise SchemaError(f"OBJ line {lineno}: bad face index '{token}'") from e
    if idx < 0:
        idx = n_vertices + idx  # OBJ negative indices are relative
    elif idx > 0:
        idx = idx - 1
    else:
        raise SchemaError(f"OBJ line {lineno}: face index 0 is invalid")
    if not (0 <= idx < n_vertices):
        raise SchemaError(f"OBJ line {lineno}: face index out of range")
    return idx


def load_obj(path) -> TriangleMesh:
    """Parse a Wavefront OBJ; polygon faces are fan-triangulated."""
    vertices: list[list[float]] = []
    triangles: list[tuple[int, int, int]] = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise SchemaError(f"OBJ line {lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(v) for v in parts[1:4]])
                except ValueError as e:
                    raise SchemaError(f"OBJ line {lineno}: bad vertex coordinate") from e
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise SchemaError(f"OBJ line {lineno}: face needs at least 3 vertices")
                idx = [_parse_face_token(t, len(vertices), lineno) for t in parts[1:]]
                for i in range(1, len(idx) - 1):
                    triangles.append((idx[0], idx[i], idx[i + 1]))
            # other record types (vn, vt, o, g, s, usemtl, ...) are ignored
    if not triangles:
        raise SchemaError("OBJ contains no faces")
    return TriangleMesh(np.asarray(vertices), np.asarray(triangles))


def raycast_depth(mesh: TriangleMesh, mesh_pose: Pose, camera: Camera) -> np.ndarray:
    """Nearest-hit depth map of the mesh, +inf where rays miss.

    Moller-Trumbore intersection with rays through pixel centers; depth is
    camera-frame z. Triangles with area below 1e-12 m^2 are skipped.
    """
    verts_cam = camera.world_to_camera(mesh_pose.transform_points(mesh.vertices))
    dirs = camera.pixel_ray_directions().reshape(-1, 3)  # dz = 1 => t equals depth
    depth = np.full(dirs.shape[0], np.inf)

    v0 = verts_cam[mesh.triangles[:, 0]]
    v1 = verts_cam[mesh.triangles[:, 1]]
    v2 = verts_cam[mesh.triangles[:, 2]]
    e1 = v1 - v0
    e2 = v2 - v0
    areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
    live = areas >= _DEGENERATE_AREA

    for t_idx in np.flatnonzero(live):
        a, b = e1[t_idx], e2[t_idx]
        pvec = np.cross(dirs, b)
        det = pvec @ a
        ok = np.abs(det) > _RAY_EPS
        inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = -v0[t_idx]  # ray origin is the camera-frame origin
        u = (pvec @ s) * inv_det
        ok &= (u >= 0.0) & (u <= 1.0)
        qvec = np.cross(s, a)
        v = (dirs @ qvec) * inv_det
        ok &= (v >= 0.0) & (u + v <= 1.0)
        t = (b @ qvec) * inv_det
        ok &= t > _RAY_EPS
        np.minimum(depth, np.where(ok, t, np.inf), out=depth)

    return depth.reshape(camera.height, camera.width)


def occlusion_mask(d_phys: np.ndarray, render: RenderOutput) -> OcclusionResult:
    """Mask pixels where occluder depth beats splat depth; ratio over object."""
    if d_phys.shape != render.depth.shape:
        raise ValidationError(
            f"depth map shape {d_phys.shape} does not match render {render.depth.shape}"
        )
    mask = d_phys < render.depth
    object_pixels = render.alpha >= DEPTH_VALID_THRESHOLD
    n_obj = int(object_pixels.sum())
    ratio = float((mask & object_pixels).sum() / n_obj) if n_obj else 0.0
    return OcclusionResult(mask=mask, occlusion_ratio=ratio)


def composite_frame(
    render: RenderOutput, occlusion: OcclusionResult, background
) -> tuple[np.ndarray, np.ndarray]:
    """Final RGB over a background plus the visible-object mask.

    `background` is an RGB triple or an (H,W,3) image. Occluded object
    pixels and non-object pixels take the background; visible object pixels
    take the un-premultiplied splat color.
    """
    h, w = render.alpha.shape
    background = np.asarray(background, dtype=np.float64)
    if background.ndim == 1:
        image = np.broadcast_to(background, (h, w, 3)).copy()
    else:
        if background.shape != (h, w, 3):
            raise ValidationError(
                f"background shape {background.shape} does not match frame ({h}, {w}, 3)"
            )
        image = background.copy()

    visible = (render.alpha >= DEPTH_VALID_THRESHOLD) & ~occlusion.mask
    image[visible] = np.clip(render.rgb[visible] / render.alpha[visible, None], 0.0, 1.0)
    return image, visible
