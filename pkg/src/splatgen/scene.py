"""Gaussian splat scenes: binary PLY parsing, serialization, and stats.

Scenes are columnar (struct-of-arrays) so bulk SH perturbation touches only
the two color buffers. Opacity stays a logit and scales stay logs, exactly
as stored on disk; activations happen in the renderer.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError, ValidationError

SH_REST_COEFFS = 45  # degree 1..3 real SH, 15 per channel, channel-major

# Canonical on-disk property order. Loading resolves properties by name, so
# files with shuffled or extra properties still parse.
_REQUIRED_PROPS = (
    ["x", "y", "z"]
    + [f"f_dc_{i}" for i in range(3)]
    + [f"f_rest_{i}" for i in range(SH_REST_COEFFS)]
    + ["opacity"]
    + [f"scale_{i}" for i in range(3)]
    + [f"rot_{i}" for i in range(4)]
)

_PLY_DTYPES = {
    "float": "<f4",
    "float32": "<f4",
    "double": "<f8",
    "float64": "<f8",
    "uchar": "u1",
    "uint8": "u1",
    "char": "i1",
    "int8": "i1",
    "short": "<i2",
    "int16": "<i2",
    "ushort": "<u2",
    "uint16": "<u2",
    "int": "<i4",
    "int32": "<i4",
    "uint": "<u4",
    "uint32": "<u4",
}


@dataclass(eq=False)
class GaussianScene:
    """Columnar 3D Gaussian scene.

    positions (N,3) meters; rotations (N,4) unit quaternions (w,x,y,z);
    log_scales (N,3) log-meters; opacity_logits (N,); sh0 (N,3) DC SH
    coefficients; sh_rest (N,45) higher-order coefficients, channel-major.
    """

    positions: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    sh0: np.ndarray
    sh_rest: np.ndarray

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "GaussianScene":
        return GaussianScene(
            self.positions.copy(),
            self.rotations.copy(),
            self.log_scales.copy(),
            self.opacity_logits.copy(),
            self.sh0.copy(),
            self.sh_rest.copy(),
        )

    def with_sh(self, sh0: np.ndarray, sh_rest: np.ndarray) -> "GaussianScene":
        """New scene sharing geometry buffers but carrying fresh SH buffers."""
        return GaussianScene(self.positions, self.rotations, self.log_scales, self.opacity_logits, sh0, sh_rest)


@dataclass(frozen=True)
class SceneStats:
    count: int
    aabb_min: np.ndarray
    aabb_max: np.ndarray
    centroid: np.ndarray


def _check_finite(name: str, arr: np.ndarray) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = int(np.argwhere(bad.reshape(arr.shape[0], -1).any(axis=1))[0, 0])
        raise ValidationError(f"non-finite value in '{name}' at vertex {idx}")


def make_scene(
    positions, rotations, log_scales, opacity_logits, sh0, sh_rest, dtype=np.float32
) -> GaussianScene:
    """Validate buffers and assemble a scene (quaternions renormalized)."""
    positions = np.ascontiguousarray(positions, dtype=dtype).reshape(-1, 3)
    n = positions.shape[0]
    if n < 1:
        raise ValidationError("scene needs at least one Gaussian")
    rotations = np.ascontiguousarray(rotations, dtype=dtype).reshape(n, 4)
    log_scales = np.ascontiguousarray(log_scales, dtype=dtype).reshape(n, 3)
    opacity_logits = np.ascontiguousarray(opacity_logits, dtype=dtype).reshape(n)
    sh0 = np.ascontiguousarray(sh0, dtype=dtype).reshape(n, 3)
    sh_rest = np.ascontiguousarray(sh_rest, dtype=dtype).reshape(n, SH_REST_COEFFS)

    for name, arr in (
        ("positions", positions),
        ("rotations", rotations),
        ("log_scales", log_scales),
        ("opacity", opacity_logits),
        ("sh0", sh0),
        ("sh_rest", sh_rest),
    ):
        _check_finite(name, arr)

    norms = np.linalg.norm(rotations.astype(np.float64), axis=1)
    if (norms < 1e-12).any():
        idx = int(np.argmax(norms < 1e-12))
        raise ValidationError(f"zero-norm quaternion at vertex {idx}")
    # Only renormalize quaternions that actually deviate; keeps already-unit
    # data bit-identical so load/save round trips exactly.
    off = np.abs(norms - 1.0) > 1e-6
    if off.any():
        rotations = rotations.copy()
        rotations[off] = (rotations[off].astype(np.float64) / norms[off, None]).astype(dtype)

    return GaussianScene(positions, rotations, log_scales, opacity_logits, sh0, sh_rest)


def _parse_header(f) -> tuple[int, list[tuple[str, str]]]:
    magic = f.readline().strip()
    if magic != b"ply":
        raise SchemaError("not a PLY file (missing 'ply' magic)")
    fmt = None
    count = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    while True:
        raw = f.readline()
        if not raw:
            raise SchemaError("unexpected end of file inside PLY header")
        line = raw.decode("ascii", errors="replace").strip()
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise SchemaError("list properties are not supported for splat vertices")
            props.append((parts[1], parts[2]))
    if fmt != "binary_little_endian":
        raise SchemaError(f"unsupported PLY format '{fmt}'; need binary_little_endian 1.0")
    if count is None:
        raise SchemaError("PLY header declares no vertex element")
    return count, props


def load_ply(path) -> GaussianScene:
    """Load a binary little-endian 3DGS point cloud.

    Properties are resolved by name; unknown extras (e.g. normals) are
    ignored. Raises SchemaError for structural problems and ValidationError
    for bad values.
    """
    with open(path, "rb") as f:
        count, props = _parse_header(f)
        names = [name for _, name in props]
        missing = [p for p in _REQUIRED_PROPS if p not in names]
        if missing:
            raise SchemaError(f"PLY is missing required property '{missing[0]}'")
        try:
            dtype = np.dtype([(name, _PLY_DTYPES[t]) for t, name in props])
        except KeyError as e:
            raise SchemaError(f"unsupported PLY property type {e}") from e
        payload = f.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise SchemaError(
            f"PLY payload truncated: expected {count * dtype.itemsize} bytes, got {len(payload)}"
        )
    rec = np.frombuffer(payload, dtype=dtype, count=count)

    def cols(names_):
        return np.stack([rec[n].astype(np.float32) for n in names_], axis=1)

    return make_scene(
        positions=cols(["x", "y", "z"]),
        rotations=cols([f"rot_{i}" for i in range(4)]),
        log_scales=cols([f"scale_{i}" for i in range(3)]),
        opacity_logits=rec["opacity"].astype(np.float32),
        sh0=cols([f"f_dc_{i}" for i in range(3)]),
        sh_rest=cols([f"f_rest_{i}" for i in range(SH_REST_COEFFS)]),
    )


def save_ply(scene: GaussianScene, path) -> None:
    """Write the scene with the canonical property order, float32 payload."""
    n = scene.count
    dtype = np.dtype([(name, "<f4") for name in _REQUIRED_PROPS])
    rec = np.empty(n, dtype=dtype)
    rec["x"], rec["y"], rec["z"] = scene.positions.T.astype(np.float32)
    for i in range(3):
        rec[f"f_dc_{i}"] = scene.sh0[:, i].astype(np.float32)
    for i in range(SH_REST_COEFFS):
        rec[f"f_rest_{i}"] = scene.sh_rest[:, i].astype(np.float32)
    rec["opacity"] = scene.opacity_logits.astype(np.float32)
    for i in range(3):
        rec[f"scale_{i}"] = scene.log_scales[:, i].astype(np.float32)
    for i in range(4):
        rec[f"rot_{i}"] = scene.rotations[:, i].astype(np.float32)

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {name}" for name in _REQUIRED_PROPS]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(rec.tobytes())


def scene_stats(scene: GaussianScene) -> SceneStats:
    p = scene.positions.astype(np.float64)
    return SceneStats(
        count=scene.count,
        aabb_min=p.min(axis=0),
        aabb_max=p.max(axis=0),
        centroid=p.mean(axis=0),
    )


def scene_digest(scene: GaussianScene) -> str:
    """Content hash of all buffers; keys the clustering sidecar cache."""
    h = hashlib.sha256()
    for arr in (
        scene.positions,
        scene.rotations,
        scene.log_scales,
        scene.opacity_logits,
        scene.sh0,
        scene.sh_rest,
    ):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()
