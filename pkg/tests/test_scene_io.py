import numpy as np
import pytest

from splatgen import ValidationError, load_ply, make_scene, save_ply, scene_stats
from splatgen.errors import SchemaError
from splatgen.rng import Stream
from tests.conftest import build_scene

FIELDS = ("positions", "rotations", "log_scales", "opacity_logits", "sh0", "sh_rest")


def write_minimal_ply(path, rows, prop_order=None, extra_props=()):
    """Hand-rolled writer so the loader is tested against an independent producer."""
    props = prop_order or (
        ["x", "y", "z"]
        + [f"f_dc_{i}" for i in range(3)]
        + [f"f_rest_{i}" for i in range(45)]
        + ["opacity"]
        + [f"scale_{i}" for i in range(3)]
        + [f"rot_{i}" for i in range(4)]
    )
    props = list(props) + list(extra_props)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(rows)}"]
    header += [f"property float {p}" for p in props]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode())
        for row in rows:
            f.write(np.asarray([row[p] for p in props], dtype="<f4").tobytes())


def zero_row(**overrides):
    row = {p: 0.0 for p in (
        ["x", "y", "z"] + [f"f_dc_{i}" for i in range(3)] + [f"f_rest_{i}" for i in range(45)]
        + ["opacity"] + [f"scale_{i}" for i in range(3)] + [f"rot_{i}" for i in range(4)]
    )}
    row.update(overrides)
    return row


def test_single_vertex_identity_quaternion(tmp_path):
    path = tmp_path / "one.ply"
    write_minimal_ply(path, [zero_row(rot_0=1.0)])
    scene = load_ply(path)
    assert scene.count == 1
    assert np.array_equal(scene.rotations[0], [1.0, 0.0, 0.0, 0.0])


def test_quaternion_normalization_forced(tmp_path):
    path = tmp_path / "norm.ply"
    write_minimal_ply(path, [zero_row(rot_0=2.0)])
    scene = load_ply(path)
    assert np.allclose(scene.rotations[0], [1.0, 0.0, 0.0, 0.0])


def test_round_trip_is_exact(tmp_path):
    scene = build_scene(64, seed=3)
    p1 = tmp_path / "a.ply"
    p2 = tmp_path / "b.ply"
    save_ply(scene, p1)
    loaded = load_ply(p1)
    save_ply(loaded, p2)
    again = load_ply(p2)
    for f in FIELDS:
        assert np.array_equal(getattr(loaded, f), getattr(again, f)), f


def test_property_order_resolved_by_name(tmp_path):
    row = zero_row(x=1.5, y=-2.0, z=0.25, rot_0=1.0, f_dc_1=0.75, opacity=-3.0)
    shuffled = list(zero_row().keys())[::-1]
    path = tmp_path / "shuffled.ply"
    write_minimal_ply(path, [row], prop_order=shuffled)
    scene = load_ply(path)
    assert np.array_equal(scene.positions[0], [1.5, -2.0, 0.25])
    assert scene.sh0[0, 1] == 0.75
    assert scene.opacity_logits[0] == -3.0


def test_extra_properties_ignored(tmp_path):
    row = zero_row(rot_0=1.0)
    row.update({"nx": 9.0, "ny": 9.0, "nz": 9.0})
    path = tmp_path / "extra.ply"
    write_minimal_ply(path, [row], extra_props=["nx", "ny", "nz"])
    assert load_ply(path).count == 1


def test_missing_property_names_the_property(tmp_path):
    props = [p for p in zero_row() if p != "opacity"]
    path = tmp_path / "missing.ply"
    row = {p: 0.0 for p in props}
    row["rot_0"] = 1.0
    write_minimal_ply(path, [row], prop_order=props)
    with pytest.raises(SchemaError, match="opacity"):
        load_ply(path)


def test_nonfinite_value_reports_vertex_index(tmp_path):
    rows = [zero_row(rot_0=1.0), zero_row(rot_0=1.0, x=float("nan"))]
    path = tmp_path / "nan.ply"
    write_minimal_ply(path, rows)
    with pytest.raises(ValidationError, match="vertex 1"):
        load_ply(path)


def test_zero_norm_quaternion_rejected(tmp_path):
    path = tmp_path / "zq.ply"
    write_minimal_ply(path, [zero_row()])
    with pytest.raises(ValidationError, match="quaternion"):
        load_ply(path)


def test_save_preserves_vertex_count(tmp_path):
    scene = build_scene(2, seed=1)
    path = tmp_path / "two.ply"
    save_ply(scene, path)
    header = path.read_bytes().split(b"end_header")[0]
    assert b"element vertex 2" in header
    assert load_ply(path).count == 2


def test_save_to_empty_path_errors():
    scene = build_scene(1, seed=1)
    with pytest.raises(OSError):
        save_ply(scene, "")


def test_loading_does_not_mutate_sh(tmp_path):
    scene = build_scene(32, seed=4)
    path = tmp_path / "sh.ply"
    save_ply(scene, path)
    loaded = load_ply(path)
    assert np.array_equal(loaded.sh0, scene.sh0)
    assert np.array_equal(loaded.sh_rest, scene.sh_rest)


def test_stats_two_points():
    scene = make_scene(
        [[0, 0, 0], [1, 1, 1]],
        [[1, 0, 0, 0]] * 2,
        np.full((2, 3), -5.0),
        [0.0, 0.0],
        np.zeros((2, 3)),
        np.zeros((2, 45)),
    )
    stats = scene_stats(scene)
    assert np.array_equal(stats.centroid, [0.5, 0.5, 0.5])
    assert np.array_equal(stats.aabb_min, [0, 0, 0])
    assert np.array_equal(stats.aabb_max, [1, 1, 1])


def test_stats_single_point_degenerate():
    scene = make_scene(
        [[0.3, -0.2, 0.9]], [[1, 0, 0, 0]], [[-5, -5, -5]], [0.0], np.zeros((1, 3)), np.zeros((1, 45))
    )
    stats = scene_stats(scene)
    assert np.allclose(stats.centroid, [0.3, -0.2, 0.9], atol=1e-7)
    assert np.array_equal(stats.aabb_min, stats.aabb_max)


def test_stats_uniform_cloud_centroid_near_center():
    rng = Stream(99)
    pts = rng.uniform(size=(1000, 3))
    scene = make_scene(
        pts, np.tile([1.0, 0, 0, 0], (1000, 1)), np.full((1000, 3), -5.0),
        np.zeros(1000), np.zeros((1000, 3)), np.zeros((1000, 45)),
    )
    # direct-mean oracle: the sample mean itself, compared to the box center
    assert np.all(np.abs(scene_stats(scene).centroid - 0.5) < 0.05)
