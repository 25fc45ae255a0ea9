"""Ground-truth labels and pose-accuracy metrics.

Each frame is annotated with nine keypoints: the eight corners of the
Gaussian cloud's canonical-frame bounding box plus its centroid, projected
to normalized 2.5D coordinates (u, v in [0,1], metric depth in meters).
A 6D pose is recoverable from the keypoints alone via rigid Procrustes
alignment, which is also how label consistency is verified.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .errors import EstimationError, ValidationError
from .scene import GaussianScene
from .transforms import Pose, matrix_to_quat, pose_from_dict, pose_to_dict, rotation_angle_rad

_MIN_DEPTH = 1e-6  # camera-frame z below this flags a keypoint invalid

ACCURACY_TRANS_MM = 10.0
ACCURACY_ROT_DEG = 10.0


@dataclass(frozen=True)
class KeypointSet:
    """Nine canonical-frame keypoints: 8 AABB corners + centroid (last)."""

    points: np.ndarray  # (9, 3) meters
    aabb_min: np.ndarray
    aabb_max: np.ndarray


@dataclass
class LabelRecord:
    frame_id: int
    pose: Pose  # object pose in the camera frame
    keypoints: np.ndarray  # (9, 3) rows of (u, v, depth_m)
    occlusion_ratio: float


def canonical_keypoints(scene: GaussianScene) -> KeypointSet:
    """AABB corners in bit-pattern order (bit2=x, bit1=y, bit0=z, 0=low)
    followed by the centroid."""
    p = scene.positions.astype(np.float64)
    lo, hi = p.min(axis=0), p.max(axis=0)
    bounds = np.stack([lo, hi])
    corners = np.array(
        [[bounds[(i >> 2) & 1, 0], bounds[(i >> 1) & 1, 1], bounds[i & 1, 2]] for i in range(8)]
    )
    return KeypointSet(
        points=np.vstack([corners, p.mean(axis=0)]), aabb_min=lo, aabb_max=hi
    )


def project_keypoints(
    kps: KeypointSet, object_pose: Pose, camera: Camera
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized 2.5D projections (9,3) plus a validity flag per keypoint.

    u, v are pixel coordinates divided by image width/height and may leave
    [0, 1] for off-frame keypoints; depth stays metric. Keypoints at or
    behind the camera plane are flagged invalid.
    """
    p_cam = camera.world_to_camera(object_pose.transform_points(kps.points))
    z = p_cam[:, 2]
    valid = z > _MIN_DEPTH
    safe_z = np.where(valid, z, 1.0)
    u = (camera.fx * p_cam[:, 0] / safe_z + camera.cx) / camera.width
    v = (camera.fy * p_cam[:, 1] / safe_z + camera.cy) / camera.height
    uvd = np.stack([u, v, z], axis=1)
    uvd[~valid, :2] = np.nan
    return uvd, valid


def backproject_keypoints(uvd: np.ndarray, camera: Camera) -> np.ndarray:
    """Invert project_keypoints into camera-frame 3D points."""
    uvd = np.asarray(uvd, dtype=np.float64)
    z = uvd[:, 2]
    x = (uvd[:, 0] * camera.width - camera.cx) * z / camera.fx
    y = (uvd[:, 1] * camera.height - camera.cy) * z / camera.fy
    return np.stack([x, y, z], axis=1)


def procrustes_pose(
    canonical: KeypointSet,
    observed: np.ndarray,
    camera: Camera,
    valid: np.ndarray | None = None,
) -> Pose:
    """Recover the camera-frame object pose from observed 2.5D keypoints.

    Rigid (no-scale) least-squares alignment: back-project observations to
    camera space, align the canonical points to them via SVD of the
    cross-covariance with a det-correction for reflections.
    """
    observed = np.asarray(observed, dtype=np.float64).reshape(-1, 3)
    if valid is None:
        valid = observed[:, 2] > _MIN_DEPTH
        valid &= np.all(np.isfinite(observed), axis=1)
    src = canonical.points[valid]
    dst = backproject_keypoints(observed[valid], camera)
    if src.shape[0] < 3:
        raise EstimationError(f"need >= 3 valid keypoints, have {src.shape[0]}")

    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    h = (src - src_mean).T @ (dst - dst_mean)
    u, s, vt = np.linalg.svd(h)
    if s[1] < 1e-9 * s[0]:
        raise EstimationError("degenerate keypoint configuration (rank-deficient)")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = dst_mean - r @ src_mean
    return Pose(t, matrix_to_quat(r))


def add_metric(pose_a: Pose, pose_b: Pose, model_points: np.ndarray) -> float:
    """Average Distance of model points between two poses, in millimeters."""
    pts = np.asarray(model_points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < 1:
        raise ValidationError("ADD needs at least one model point")
    da = pose_a.transform_points(pts)
    db = pose_b.transform_points(pts)
    return float(np.linalg.norm(da - db, axis=1).mean() * 1000.0)


def pose_errors(pose_a: Pose, pose_b: Pose) -> tuple[float, float]:
    """(translation error mm, rotation error degrees)."""
    trans = float(np.linalg.norm(pose_a.position - pose_b.position) * 1000.0)
    rot = float(np.degrees(rotation_angle_rad(pose_a.quaternion, pose_b.quaternion)))
    return trans, rot


def accuracy(
    pose_a: Pose,
    pose_b: Pose,
    trans_thresh_mm: float = ACCURACY_TRANS_MM,
    rot_thresh_deg: float = ACCURACY_ROT_DEG,
) -> bool:
    """Strict (<) accuracy test at 10 mm / 10 degrees."""
    trans, rot = pose_errors(pose_a, pose_b)
    return trans < trans_thresh_mm and rot < rot_thresh_deg


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 2:
        raise ValidationError("pearson needs two equal-length series of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("pearson undefined for zero-variance series")
    return float((dx @ dy) / np.sqrt(sx * sy))


# --- serialization and reporting ---------------------------------------------

def label_to_dict(rec: LabelRecord) -> dict:
    return {
        "frame_id": rec.frame_id,
        "pose": pose_to_dict(rec.pose),
        "keypoints": [[float(v) for v in row] for row in rec.keypoints],
        "occlusion_ratio": rec.occlusion_ratio,
    }


def label_from_dict(d: dict) -> LabelRecord:
    try:
        return LabelRecord(
            frame_id=int(d["frame_id"]),
            pose=pose_from_dict(d["pose"]),
            keypoints=np.asarray(d["keypoints"], dtype=np.float64).reshape(9, 3),
            occlusion_ratio=float(d["occlusion_ratio"]),
        )
    except KeyError as e:
        raise ValidationError(f"label record missing key {e}") from e


def write_labels(path, records) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(label_to_dict(rec)) + "\n")


def read_labels(path) -> list[LabelRecord]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(label_from_dict(json.loads(line)))
    return out


def evaluate_poses(
    predicted: list[Pose],
    ground_truth: list[Pose],
    model_points: np.ndarray,
    occlusion_ratios=None,
) -> dict:
    """Summary metrics between two aligned pose sequences.

    Pearson entries correlate occlusion against the per-frame errors and
    are null when no occlusion series is supplied or it has no variance.
    """
    if len(predicted) != len(ground_truth) or not predicted:
        raise ValidationError("evaluate_poses needs equal-length non-empty pose lists")
    adds = [add_metric(p, g, model_points) for p, g in zip(predicted, ground_truth)]
    errs = [pose_errors(p, g) for p, g in zip(predicted, ground_truth)]
    trans = [e[0] for e in errs]
    rots = [e[1] for e in errs]
    acc = [accuracy(p, g) for p, g in zip(predicted, ground_truth)]

    pearson_trans = pearson_rot = None
    if occlusion_ratios is not None:
        occ = np.asarray(occlusion_ratios, dtype=np.float64).ravel()
        if occ.size != len(predicted):
            raise ValidationError("occlusion series length does not match pose count")
        try:
            pearson_trans = pearson(occ, trans)
            pearson_rot = pearson(occ, rots)
        except ValidationError:
            pass  # constant series: correlation undefined, stays null

    return {
        "add_mm_mean": float(np.mean(adds)),
        "accuracy_pct": float(100.0 * np.mean(acc)),
        "trans_mm_mean": float(np.mean(trans)),
        "rot_deg_mean": float(np.mean(rots)),
        "pearson_trans": pearson_trans,
        "pearson_rot": pearson_rot,
    }
