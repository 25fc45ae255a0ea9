"""Rigid transforms: quaternion math and SE(3) poses.

Quaternions are (w, x, y, z) throughout. Poses map local coordinates into
their parent frame: p_parent = R(q) @ p_local + position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import Stream


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise ValidationError(f"cannot normalize quaternion with norm {n}")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quats_to_matrices(q: np.ndarray) -> np.ndarray:
    """Batched quaternion -> rotation matrix, (N, 4) -> (N, 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((q.shape[0], 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion (w >= 0), Shepperd's branch method."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def axis_angle_to_quat(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle_rad
    return np.concatenate([[np.cos(half)], np.sin(half) * axis / n])


def rotation_angle_rad(qa: np.ndarray, qb: np.ndarray) -> float:
    """Geodesic angle between two orientations; sign-flip invariant."""
    d = abs(float(np.dot(qa, qb)))
    return 2.0 * np.arccos(min(1.0, d))


def uniform_quaternion(rng: Stream) -> np.ndarray:
    """Uniform sample on SO(3) (Shoemake's subgroup method)."""
    u1, u2, u3 = rng.uniform(size=3)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    return np.array(
        [
            b * np.cos(2 * np.pi * u3),
            a * np.sin(2 * np.pi * u2),
            a * np.cos(2 * np.pi * u2),
            b * np.sin(2 * np.pi * u3),
        ]
    )


def random_unit_vector(rng: Stream) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    while n < 1e-12:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
    return v / n


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotation quaternion (w,x,y,z) + translation in meters."""

    position: np.ndarray
    quaternion: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.quaternion, dtype=np.float64).reshape(4)
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
            raise ValidationError("pose has non-finite components")
        n = np.linalg.norm(q)
        if n < 1e-12:
            raise ValidationError("pose quaternion has zero norm")
        if abs(n - 1.0) > 1e-12:
            q = q / n
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "quaternion", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.quaternion)

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self * other)(p) = self(other(p))."""
        r = self.rotation_matrix()
        return Pose(r @ other.position + self.position, quat_multiply(self.quaternion, other.quaternion))

    def inverse(self) -> "Pose":
        r = self.rotation_matrix()
        return Pose(-(r.T @ self.position), quat_conjugate(self.quaternion))

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation_matrix().T + self.position

    def almost_equal(self, other: "Pose", pos_tol: float = 1e-9, rot_tol_rad: float = 1e-9) -> bool:
        return (
            float(np.linalg.norm(self.position - other.position)) <= pos_tol
            and rotation_angle_rad(self.quaternion, other.quaternion) <= rot_tol_rad
        )


def pose_to_dict(pose: Pose) -> dict:
    return {
        "position_m": [float(v) for v in pose.position],
        "quaternion_wxyz": [float(v) for v in pose.quaternion],
    }


def pose_from_dict(d: dict) -> Pose:
    try:
        return Pose(np.asarray(d["position_m"], dtype=np.float64), np.asarray(d["quaternion_wxyz"], dtype=np.float64))
    except KeyError as e:
        raise ValidationError(f"pose dict missing key {e}") from e
