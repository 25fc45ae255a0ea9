import numpy as np
import pytest
from scipy import ndimage

from splatgen import (
    ConfigError,
    ImageAugConfig,
    Pose,
    PoseNoiseConfig,
    augment_image,
    corrupt_stream,
    init_episode,
)
from splatgen.noise import (
    image_aug_config_from_dict,
    image_aug_config_to_dict,
    pose_noise_config_from_dict,
    pose_noise_config_to_dict,
    read_pose_stream,
    write_pose_stream,
)
from splatgen.rng import Stream
from splatgen.transforms import uniform_quaternion


def passthrough_config(**overrides):
    base = dict(
        update_period=(1, 1),
        jitter_prob=(0.0, 0.0),
        failure_prob=(0.0, 0.0),
        position_noise_mm=(0.0, 0.0),
        position_bias_mm=(0.0, 0.0),
        orientation_noise_deg=(0.0, 0.0),
        orientation_bias_deg=(0.0, 0.0),
    )
    base.update(overrides)
    return PoseNoiseConfig(**base)


def random_poses(n, seed=0):
    rng = Stream(seed)
    return [
        Pose(rng.uniform(-0.1, 0.1, size=3), uniform_quaternion(rng)) for _ in range(n)
    ]


# --- episodes -------------------------------------------------------------------

def test_init_episode_degenerate_is_passthrough():
    state = init_episode(passthrough_config(), Stream(1))
    assert state.update_period == 1
    assert state.jitter_prob == 0.0
    assert state.failure_prob == 0.0
    assert np.all(state.position_bias_m == 0.0)
    assert state.orientation_bias_rad == 0.0


def test_init_episode_fixed_period():
    cfg = passthrough_config(update_period=(3, 3))
    for seed in range(10):
        assert init_episode(cfg, Stream(seed)).update_period == 3


def test_init_episode_period_range_covered():
    cfg = PoseNoiseConfig()
    periods = {init_episode(cfg, Stream(s)).update_period for s in range(200)}
    assert periods == {1, 2, 3}


def test_init_episode_failure_prob_mean():
    rng = Stream(2)
    cfg = PoseNoiseConfig()
    samples = [init_episode(cfg, rng).failure_prob for _ in range(100_000)]
    assert abs(np.mean(samples) - 0.15) < 0.005  # uniform over [0, 0.3]


def test_config_validation():
    with pytest.raises(ConfigError):
        PoseNoiseConfig(update_period=(0, 3))
    with pytest.raises(ConfigError):
        PoseNoiseConfig(failure_prob=(0.4, 0.2))
    with pytest.raises(ConfigError):
        PoseNoiseConfig(jitter_prob=(0.0, 1.5))


# --- stream corruption -------------------------------------------------------------

def test_passthrough_identity():
    poses = random_poses(50)
    state = init_episode(passthrough_config(), Stream(3))
    out = corrupt_stream(poses, state, Stream(4))
    for a, b in zip(out, poses):
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.quaternion, b.quaternion)


def test_downsampling_holds_windows_of_k():
    poses = random_poses(30, seed=5)
    state = init_episode(passthrough_config(update_period=(3, 3)), Stream(6))
    out = corrupt_stream(poses, state, Stream(7))
    for t, pose in enumerate(out):
        src = poses[3 * (t // 3)]
        assert np.array_equal(pose.position, src.position)


def test_downsampling_distinct_value_bound():
    t_len, k = 100, 3
    poses = random_poses(t_len, seed=8)
    state = init_episode(passthrough_config(update_period=(k, k)), Stream(9))
    out = corrupt_stream(poses, state, Stream(10))
    distinct = 1 + sum(
        1 for i in range(1, t_len) if not np.array_equal(out[i].position, out[i - 1].position)
    )
    assert distinct <= int(np.ceil(t_len / k))


def test_failure_probability_one_replaces_everything():
    poses = random_poses(200, seed=11)
    state = init_episode(passthrough_config(failure_prob=(1.0, 1.0)), Stream(12))
    out = corrupt_stream(poses, state, Stream(13))
    replaced = sum(
        1 for a, b in zip(out, poses) if not np.allclose(a.position, b.position)
    )
    assert replaced == len(poses)
    for pose in out:
        assert np.all(np.abs(pose.position) <= 0.1)  # default replacement box


def test_failure_frequency_tracks_probability():
    poses = random_poses(1, seed=14) * 100_000
    state = init_episode(passthrough_config(failure_prob=(0.25, 0.25)), Stream(15))
    out = corrupt_stream(poses, state, Stream(16))
    src = poses[0]
    freq = np.mean([not np.array_equal(p.position, src.position) for p in out])
    assert abs(freq - 0.25) < 0.02


def test_bias_constancy():
    poses = random_poses(40, seed=17)
    cfg = passthrough_config(position_bias_mm=(-12.0, 12.0))
    state = init_episode(cfg, Stream(18))
    out = corrupt_stream(poses, state, Stream(19))
    deltas = np.stack([o.position - p.position for o, p in zip(out, poses)])
    assert np.allclose(deltas, deltas[0], atol=1e-15)
    assert np.allclose(deltas[0], state.position_bias_m)
    assert np.all(np.abs(deltas[0]) <= 0.012)


def test_jitter_repeats_previous_output():
    poses = random_poses(50, seed=20)
    state = init_episode(passthrough_config(jitter_prob=(1.0, 1.0)), Stream(21))
    out = corrupt_stream(poses, state, Stream(22))
    # after the first step every output repeats the first one forever
    for pose in out[1:]:
        assert np.array_equal(pose.position, out[0].position)


def test_orientation_noise_bounded():
    poses = random_poses(200, seed=23)
    cfg = passthrough_config(orientation_noise_deg=(-1.0, 1.0))
    state = init_episode(cfg, Stream(24))
    out = corrupt_stream(poses, state, Stream(25))
    from splatgen.transforms import rotation_angle_rad

    for o, p in zip(out, poses):
        ang = np.degrees(rotation_angle_rad(o.quaternion, p.quaternion))
        assert ang <= 1.0 + 1e-9


def test_empty_stream_rejected():
    state = init_episode(passthrough_config(), Stream(1))
    from splatgen.errors import ValidationError

    with pytest.raises(ValidationError):
        corrupt_stream([], state, Stream(2))


def test_pose_stream_file_round_trip(tmp_path):
    poses = random_poses(7, seed=26)
    path = tmp_path / "poses.jsonl"
    write_pose_stream(path, poses)
    back = read_pose_stream(path)
    assert len(back) == 7
    for a, b in zip(poses, back):
        assert a.almost_equal(b, pos_tol=1e-12, rot_tol_rad=1e-7)


def test_pose_noise_config_json_round_trip():
    cfg = PoseNoiseConfig()
    d = pose_noise_config_to_dict(cfg)
    assert pose_noise_config_from_dict(d) == cfg
    with pytest.raises(ConfigError):
        pose_noise_config_from_dict({"bogus": 1})


# --- image augmentation ---------------------------------------------------------------

def zero_prob_config(**overrides):
    fields = {
        name: 0.0
        for name in ImageAugConfig.__dataclass_fields__
        if name.endswith("_prob")
    }
    fields.update(overrides)
    return ImageAugConfig(**fields)


def sample_image(h=24, w=32, seed=0):
    rng = Stream(seed)
    img = rng.uniform(size=(h, w, 3))
    mask = rng.uniform(size=(h, w)) > 0.5
    return img, mask


def test_all_gates_closed_identity():
    img, mask = sample_image()
    out, out_mask = augment_image(img, mask, zero_prob_config(), Stream(1))
    assert np.array_equal(out, img)
    assert np.array_equal(out_mask, mask)


def test_gamma_one_forced_identity():
    img, mask = sample_image(seed=2)
    cfg = zero_prob_config(gamma_prob=1.0, gamma_range=(1.0, 1.0))
    out, _ = augment_image(img, mask, cfg, Stream(3))
    assert np.allclose(out, img, atol=1e-15)


def test_motion_blur_impulse_three_taps():
    img = np.zeros((15, 15, 3))
    img[7, 7] = 1.0
    mask = np.zeros((15, 15), dtype=bool)
    cfg = zero_prob_config(motion_blur_prob=1.0, motion_blur_kernel=(3, 3))
    # angle drawn uniformly; force horizontal by trying seeds until cos(a)~1
    from splatgen.noise import _convolve_rgb, _motion_blur_kernel

    out = _convolve_rgb(img, _motion_blur_kernel(3, 0.0))
    assert np.allclose(out[7, 6:9, 0], 1.0 / 3.0)
    assert out[7, 5, 0] == 0.0 and out[7, 9, 0] == 0.0
    assert np.allclose(out.sum(), 1.0 * 3)

    # the gated path produces some normalized 3-tap kernel at a random angle
    blurred, _ = augment_image(img, mask, cfg, Stream(4))
    assert blurred.sum() <= img.sum() + 1e-9
    assert blurred.max() < 1.0


def test_box_blur_averages():
    img = np.zeros((9, 9, 3))
    img[4, 4] = 1.0
    cfg = zero_prob_config(box_blur_prob=1.0, box_blur_kernel=(3, 3))
    out, _ = augment_image(img, np.zeros((9, 9), bool), cfg, Stream(5))
    assert np.allclose(out[3:6, 3:6, 0], 1.0 / 9.0)


def test_brightness_scales():
    img, mask = sample_image(seed=6)
    cfg = zero_prob_config(brightness_prob=1.0, brightness_range=(0.5, 0.5))
    out, _ = augment_image(img, mask, cfg, Stream(7))
    assert np.allclose(out, img * 0.5, atol=1e-12)


def test_saturation_zero_is_grayscale():
    img, mask = sample_image(seed=8)
    cfg = zero_prob_config(saturation_prob=1.0, saturation_range=(0.0, 0.0))
    out, _ = augment_image(img, mask, cfg, Stream(9))
    assert np.allclose(out[..., 0], out[..., 1])
    assert np.allclose(out[..., 1], out[..., 2])


def test_hue_full_turn_identity():
    img, mask = sample_image(seed=10)
    cfg = zero_prob_config(hue_prob=1.0, hue_range=(1.0, 1.0))
    out, _ = augment_image(img, mask, cfg, Stream(11))
    assert np.allclose(out, img, atol=1e-9)


def test_iso_noise_changes_pixels_but_preserves_range():
    img, mask = sample_image(seed=12)
    cfg = zero_prob_config(iso_prob=1.0)
    out, _ = augment_image(img, mask, cfg, Stream(13))
    assert out.shape == img.shape
    assert not np.array_equal(out, img)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_full_default_chain_preserves_dims_and_range():
    img, mask = sample_image(seed=14)
    for seed in range(8):
        out, out_mask = augment_image(img, mask, ImageAugConfig(), Stream(seed))
        assert out.shape == img.shape
        assert out_mask.shape == mask.shape
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_opening_never_adds_pixels_outside_dilated_erosion():
    img, mask = sample_image(seed=15)
    cfg = zero_prob_config(opening_prob=1.0)
    _, out_mask = augment_image(img, mask, cfg, Stream(16))
    eroded = ndimage.binary_erosion(mask, structure=np.ones((3, 3), bool))
    allowed = ndimage.binary_dilation(eroded, structure=np.ones((3, 3), bool))
    assert not np.any(out_mask & ~allowed)
    assert not np.any(out_mask & ~mask)  # opening is anti-extensive


def test_even_kernel_config_rejected():
    with pytest.raises(ConfigError):
        ImageAugConfig(motion_blur_kernel=(4, 17))
    with pytest.raises(ConfigError):
        ImageAugConfig(box_blur_kernel=(3, 6))
    with pytest.raises(ConfigError):
        ImageAugConfig(opening_kernel=2)


def test_image_aug_config_json_round_trip():
    cfg = ImageAugConfig(motion_blur_kernel=(5, 9), iso_prob=0.5)
    d = image_aug_config_to_dict(cfg)
    assert image_aug_config_from_dict(d) == cfg
    with pytest.raises(ConfigError):
        image_aug_config_from_dict({"nope": 3})


def test_augmentation_determinism():
    img, mask = sample_image(seed=17)
    a = augment_image(img, mask, ImageAugConfig(), Stream(55))
    b = augment_image(img, mask, ImageAugConfig(), Stream(55))
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])
