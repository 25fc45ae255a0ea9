import numpy as np
import pytest

from splatgen import (
    Camera,
    EstimationError,
    Pose,
    ValidationError,
    accuracy,
    add_metric,
    canonical_keypoints,
    evaluate_poses,
    pearson,
    pose_errors,
    procrustes_pose,
    project_keypoints,
)
from splatgen.labels import (
    LabelRecord,
    backproject_keypoints,
    label_from_dict,
    label_to_dict,
    read_labels,
    write_labels,
)
from splatgen.rng import Stream
from splatgen.transforms import axis_angle_to_quat, quat_multiply, uniform_quaternion
from tests.conftest import build_scene


def identity_camera(w=120, h=120, f=150.0):
    return Camera(w, h, f, f, w / 2, h / 2, Pose.identity())


def random_in_frustum_pose(rng):
    position = np.array(
        [rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.4, 1.2)]
    )
    return Pose(position, uniform_quaternion(rng))


# --- keypoints ----------------------------------------------------------------

def test_canonical_keypoints_unit_cube():
    import splatgen

    corners = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])
    scene = splatgen.make_scene(
        corners, np.tile([1.0, 0, 0, 0], (8, 1)), np.full((8, 3), -5.0),
        np.zeros(8), np.zeros((8, 3)), np.zeros((8, 45)),
    )
    kps = canonical_keypoints(scene)
    assert kps.points.shape == (9, 3)
    assert np.allclose(kps.points[:8], corners)  # bit-pattern order: x major, z minor
    assert np.allclose(kps.points[8], [0.5, 0.5, 0.5])


def test_canonical_keypoints_single_point_degenerate():
    import splatgen

    scene = splatgen.make_scene(
        [[0.2, -0.1, 0.4]], [[1, 0, 0, 0]], [[-5, -5, -5]], [0.0],
        np.zeros((1, 3)), np.zeros((1, 45)),
    )
    kps = canonical_keypoints(scene)
    assert np.allclose(kps.points, np.tile([0.2, -0.1, 0.4], (9, 1)), atol=1e-7)


def test_canonical_keypoints_follow_axis_permutation():
    scene = build_scene(50, seed=9)
    kps = canonical_keypoints(scene)
    import splatgen

    permuted = splatgen.make_scene(
        scene.positions[:, [2, 0, 1]], scene.rotations, scene.log_scales,
        scene.opacity_logits, scene.sh0, scene.sh_rest,
    )
    kps_p = canonical_keypoints(permuted)
    orig_set = {tuple(np.round(p[[2, 0, 1]], 9)) for p in kps.points}
    perm_set = {tuple(np.round(p, 9)) for p in kps_p.points}
    assert orig_set == perm_set


def test_project_on_axis_point():
    cam = identity_camera()
    kps = canonical_keypoints_from_points(np.zeros((1, 3)))
    uvd, valid = project_keypoints(kps, Pose(np.array([0, 0, 1.0]), [1, 0, 0, 0]), cam)
    assert valid.all()
    assert np.allclose(uvd[8], [0.5, 0.5, 1.0])


def canonical_keypoints_from_points(points):
    import splatgen

    n = len(points)
    scene = splatgen.make_scene(
        points, np.tile([1.0, 0, 0, 0], (n, 1)), np.full((n, 3), -5.0),
        np.zeros(n), np.zeros((n, 3)), np.zeros((n, 45)),
    )
    return canonical_keypoints(scene)


def test_project_translation_shifts_u_linearly():
    cam = identity_camera()
    kps = canonical_keypoints_from_points(np.zeros((1, 3)))
    base = Pose(np.array([0, 0, 1.0]), [1, 0, 0, 0])
    shifted = Pose(np.array([0.1, 0, 1.0]), [1, 0, 0, 0])
    u0, _ = project_keypoints(kps, base, cam)
    u1, _ = project_keypoints(kps, shifted, cam)
    assert np.isclose(u1[8, 0] - u0[8, 0], cam.fx * 0.1 / (1.0 * cam.width))


def test_project_backproject_round_trip():
    cam = identity_camera()
    rng = Stream(41)
    kps = canonical_keypoints_from_points(rng.uniform(-0.04, 0.04, size=(30, 3)))
    pose = random_in_frustum_pose(rng)
    uvd, valid = project_keypoints(kps, pose, cam)
    assert valid.all()
    p_cam = backproject_keypoints(uvd, cam)
    expected = cam.world_to_camera(pose.transform_points(kps.points))
    assert np.max(np.abs(p_cam - expected)) < 1e-9


def test_project_flags_behind_camera():
    cam = identity_camera()
    kps = canonical_keypoints_from_points(np.zeros((1, 3)))
    _, valid = project_keypoints(kps, Pose(np.array([0, 0, -1.0]), [1, 0, 0, 0]), cam)
    assert not valid.any()


# --- procrustes -----------------------------------------------------------------

def test_procrustes_identity_projection():
    cam = identity_camera()
    rng = Stream(5)
    kps = canonical_keypoints_from_points(rng.uniform(-0.03, 0.03, size=(20, 3)))
    pose = Pose(np.array([0.0, 0.0, 0.8]), [1.0, 0, 0, 0])
    uvd, valid = project_keypoints(kps, pose, cam)
    rec = procrustes_pose(kps, uvd, cam, valid)
    assert rec.almost_equal(pose, pos_tol=1e-9, rot_tol_rad=1e-9)


def test_procrustes_recovers_known_rt():
    cam = identity_camera()
    rng = Stream(6)
    kps = canonical_keypoints_from_points(rng.uniform(-0.03, 0.03, size=(12, 3)))
    pose = random_in_frustum_pose(rng)
    uvd, valid = project_keypoints(kps, pose, cam)
    rec = procrustes_pose(kps, uvd, cam, valid)
    assert rec.almost_equal(pose, pos_tol=1e-9, rot_tol_rad=1e-8)


def test_procrustes_noisy_matches_objective_search():
    """The closed form must beat/equal a dense local search of the LSQ objective."""
    cam = identity_camera()
    rng = Stream(7)
    kps = canonical_keypoints_from_points(rng.uniform(-0.05, 0.05, size=(10, 3)))
    pose = Pose(np.array([0.01, -0.02, 0.7]), axis_angle_to_quat([1, 2, 3], 0.4))
    uvd, valid = project_keypoints(kps, pose, cam)
    noisy = uvd.copy()
    cam_pts = backproject_keypoints(uvd, cam) + rng.uniform(-0.001, 0.001, size=(9, 3))
    noisy[:, 2] = cam_pts[:, 2]
    noisy[:, 0] = (cam.fx * cam_pts[:, 0] / cam_pts[:, 2] + cam.cx) / cam.width
    noisy[:, 1] = (cam.fy * cam_pts[:, 1] / cam_pts[:, 2] + cam.cy) / cam.height
    rec = procrustes_pose(kps, noisy, cam, valid)

    def objective(p: Pose) -> float:
        return float(((p.transform_points(kps.points) - cam_pts) ** 2).sum())

    base = objective(rec)
    # dense search over small rotation/translation perturbations
    for axis in ([1, 0, 0], [0, 1, 0], [0, 0, 1]):
        for ang in (-3e-3, -1e-3, 1e-3, 3e-3):
            q = Pose(rec.position, quat_multiply(axis_angle_to_quat(axis, ang), rec.quaternion))
            assert objective(q) >= base - 1e-4 * max(base, 1e-12)
        for dt in (-1e-4, 1e-4):
            shifted = Pose(rec.position + np.array(axis) * dt, rec.quaternion)
            assert objective(shifted) >= base - 1e-4 * max(base, 1e-12)


def test_procrustes_needs_three_valid_points():
    cam = identity_camera()
    kps = canonical_keypoints_from_points(Stream(1).uniform(size=(5, 3)))
    uvd = np.full((9, 3), 0.5)
    valid = np.zeros(9, dtype=bool)
    valid[:2] = True
    with pytest.raises(EstimationError):
        procrustes_pose(kps, uvd, cam, valid)


def test_procrustes_rejects_collinear_configuration():
    cam = identity_camera()
    line = np.stack([np.linspace(0, 0.1, 9), np.zeros(9), np.zeros(9)], axis=1)
    kps = canonical_keypoints_from_points(line)
    kp_line = kps.points.copy()
    # observations also collinear: project the degenerate set at z = 1
    uvd = np.stack(
        [
            (cam.fx * kp_line[:, 0] / 1.0 + cam.cx) / cam.width,
            (cam.fy * kp_line[:, 1] / 1.0 + cam.cy) / cam.height,
            np.ones(9),
        ],
        axis=1,
    )
    with pytest.raises(EstimationError):
        procrustes_pose(kps, uvd, cam)


# --- metrics ---------------------------------------------------------------------

def cube_points():
    return np.array([[x, y, 0.0] for x in (-0.5, 0.5) for y in (-0.5, 0.5)])


def test_add_identical_poses_zero():
    p = Pose(np.array([0.1, 0.2, 0.3]), axis_angle_to_quat([1, 1, 0], 0.3))
    assert add_metric(p, p, cube_points()) == 0.0


def test_add_pure_translation_is_10mm():
    a = Pose.identity()
    b = Pose(np.array([0.01, 0.0, 0.0]), [1.0, 0, 0, 0])
    assert add_metric(a, b, cube_points()) == pytest.approx(10.0, abs=1e-9)
    assert add_metric(a, b, Stream(3).uniform(size=(50, 3))) == pytest.approx(10.0, abs=1e-9)


def test_add_180_rotation_direct_oracle():
    a = Pose.identity()
    b = Pose(np.zeros(3), axis_angle_to_quat([0, 0, 1], np.pi))
    pts = cube_points()
    rot = b.rotation_matrix()
    expected = np.mean([np.linalg.norm(p - rot @ p) for p in pts]) * 1000.0
    assert add_metric(a, b, pts) == pytest.approx(expected, rel=1e-12)


def test_add_symmetry_and_translation_bound():
    rng = Stream(12)
    pts = rng.uniform(-0.1, 0.1, size=(20, 3))
    a = random_in_frustum_pose(rng)
    b = random_in_frustum_pose(rng)
    ab = add_metric(a, b, pts)
    assert ab == add_metric(b, a, pts)
    trans_mm = np.linalg.norm(a.position - b.position) * 1000.0
    max_r = np.linalg.norm(pts, axis=1).max()
    assert ab >= trans_mm - 2000.0 * max_r - 1e-9


def test_pose_errors_identity():
    p = Pose.identity()
    assert pose_errors(p, p) == (0.0, 0.0)
    assert accuracy(p, p)


def test_accuracy_thresholds_strict():
    a = Pose.identity()
    inside = Pose(np.array([0.009, 0, 0]), axis_angle_to_quat([0, 0, 1], np.deg2rad(9.0)))
    assert accuracy(a, inside)
    at_boundary = Pose(np.array([0.01, 0, 0]), [1.0, 0, 0, 0])
    assert pose_errors(a, at_boundary)[0] >= 10.0
    assert not accuracy(a, at_boundary)
    # the acos round trip cannot reproduce exactly 10 deg; test just above it
    rot_above = Pose(np.zeros(3), axis_angle_to_quat([0, 0, 1], np.deg2rad(10.0) + 1e-9))
    assert not accuracy(a, rot_above)


def test_rotation_error_sign_flip_invariant():
    q = axis_angle_to_quat([0.2, 0.5, 1.0], 0.8)
    a = Pose(np.zeros(3), q)
    b = Pose(np.zeros(3), -q)
    assert pose_errors(a, b)[1] == 0.0


def test_pearson_exact_cases():
    x = np.arange(10.0)
    assert pearson(x, 2 * x) == pytest.approx(1.0, abs=1e-15)
    assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-15)
    # direct-formula oracle for the mixed case
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_pearson_rejects_degenerate_series():
    with pytest.raises(ValidationError):
        pearson([1.0], [2.0])
    with pytest.raises(ValidationError):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


# --- records and reports ------------------------------------------------------------

def test_label_jsonl_round_trip(tmp_path):
    rng = Stream(30)
    records = [
        LabelRecord(
            frame_id=i,
            pose=random_in_frustum_pose(rng),
            keypoints=rng.uniform(size=(9, 3)),
            occlusion_ratio=float(rng.uniform()),
        )
        for i in range(4)
    ]
    path = tmp_path / "labels.jsonl"
    write_labels(path, records)
    back = read_labels(path)
    assert len(back) == 4
    for a, b in zip(records, back):
        assert a.frame_id == b.frame_id
        assert np.allclose(a.keypoints, b.keypoints)
        assert a.pose.almost_equal(b.pose, pos_tol=1e-12, rot_tol_rad=1e-7)
        assert a.occlusion_ratio == b.occlusion_ratio


def test_label_dict_round_trip_exact():
    rec = LabelRecord(3, Pose.identity(), np.zeros((9, 3)), 0.25)
    assert label_to_dict(label_from_dict(label_to_dict(rec))) == label_to_dict(rec)


def test_evaluate_poses_report():
    rng = Stream(31)
    gt = [random_in_frustum_pose(rng) for _ in range(6)]
    pred = [Pose(p.position + [0.001 * (i + 1), 0, 0], p.quaternion) for i, p in enumerate(gt)]
    occ = [0.1 * (i + 1) for i in range(6)]
    report = evaluate_poses(pred, gt, cube_points(), occ)
    assert report["accuracy_pct"] == 100.0
    assert report["rot_deg_mean"] == pytest.approx(0.0, abs=1e-6)
    assert report["trans_mm_mean"] == pytest.approx(np.mean([1, 2, 3, 4, 5, 6]), rel=1e-9)
    assert report["pearson_trans"] == pytest.approx(1.0, abs=1e-9)


def test_evaluate_poses_identical_inputs():
    rng = Stream(32)
    poses = [random_in_frustum_pose(rng) for _ in range(5)]
    report = evaluate_poses(poses, poses, cube_points())
    assert report["add_mm_mean"] == 0.0
    assert report["accuracy_pct"] == 100.0
    assert report["pearson_trans"] is None
