"""Perception-style corruption: noisy pose streams and 2D image augmentation.

Pose streams are degraded the way a real tracker degrades: temporal
downsampling (updates only every k steps), Bernoulli jitter (the previous
output repeated an extra step), episode-constant bias plus per-step noise,
and occasional replacement by a completely random pose. Image augmentation
applies the photometric/sensor/blur operator chain, each operator gated by
its own probability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, ValidationError
from .rng import Stream
from .transforms import (
    Pose,
    axis_angle_to_quat,
    pose_from_dict,
    pose_to_dict,
    quat_multiply,
    random_unit_vector,
    uniform_quaternion,
)


def _check_range(name, rng_pair, lo_ok=None, hi_ok=None):
    lo, hi = rng_pair
    if lo > hi:
        raise ConfigError(f"{name} range [{lo}, {hi}] is not ordered")
    if lo_ok is not None and lo < lo_ok:
        raise ConfigError(f"{name} range starts below {lo_ok}")
    if hi_ok is not None and hi > hi_ok:
        raise ConfigError(f"{name} range ends above {hi_ok}")


@dataclass(frozen=True)
class PoseNoiseConfig:
    """Episode-sampled corruption parameters.

    One temporal structure (update period, jitter, failure) is shared by
    position and orientation; noise/bias magnitudes are per-channel.
    Replacement poses are uniform over the configured position box and
    uniform over orientations.
    """

    update_period: tuple[int, int] = (1, 3)  # steps, inclusive
    jitter_prob: tuple[float, float] = (0.0, 0.1)
    failure_prob: tuple[float, float] = (0.0, 0.3)
    position_noise_mm: tuple[float, float] = (-12.0, 12.0)
    position_bias_mm: tuple[float, float] = (-12.0, 12.0)
    orientation_noise_deg: tuple[float, float] = (-1.0, 1.0)
    orientation_bias_deg: tuple[float, float] = (-0.1, 0.1)
    replacement_min_m: tuple[float, float, float] = (-0.1, -0.1, -0.1)
    replacement_max_m: tuple[float, float, float] = (0.1, 0.1, 0.1)

    def __post_init__(self):
        _check_range("update_period", self.update_period, lo_ok=1)
        _check_range("jitter_prob", self.jitter_prob, 0.0, 1.0)
        _check_range("failure_prob", self.failure_prob, 0.0, 1.0)
        _check_range("position_noise_mm", self.position_noise_mm)
        _check_range("position_bias_mm", self.position_bias_mm)
        _check_range("orientation_noise_deg", self.orientation_noise_deg)
        _check_range("orientation_bias_deg", self.orientation_bias_deg)
        if any(a > b for a, b in zip(self.replacement_min_m, self.replacement_max_m)):
            raise ConfigError("replacement box min exceeds max")


@dataclass
class EpisodeNoiseState:
    """Per-episode sample of the noise model plus streaming state."""

    config: PoseNoiseConfig
    update_period: int
    jitter_prob: float
    failure_prob: float
    position_bias_m: np.ndarray
    orientation_bias_axis: np.ndarray
    orientation_bias_rad: float
    held: Pose | None = None  # last emitted output
    step: int = 0


def init_episode(config: PoseNoiseConfig, rng: Stream) -> EpisodeNoiseState:
    """Sample period, probabilities, and biases uniformly from the config."""
    lo, hi = config.update_period
    period = int(lo + rng.integers(hi - lo + 1))
    jitter = rng.uniform(*config.jitter_prob)
    failure = rng.uniform(*config.failure_prob)
    bias_mm = rng.uniform(config.position_bias_mm[0], config.position_bias_mm[1], size=3)
    axis = random_unit_vector(rng)
    bias_deg = rng.uniform(*config.orientation_bias_deg)
    return EpisodeNoiseState(
        config=config,
        update_period=period,
        jitter_prob=jitter,
        failure_prob=failure,
        position_bias_m=bias_mm / 1000.0,
        orientation_bias_axis=axis,
        orientation_bias_rad=float(np.deg2rad(bias_deg)),
    )


def _noisy_pose(pose: Pose, state: EpisodeNoiseState, rng: Stream) -> Pose:
    cfg = state.config
    noise_m = rng.uniform(cfg.position_noise_mm[0], cfg.position_noise_mm[1], size=3) / 1000.0
    position = pose.position + state.position_bias_m + noise_m

    noise_axis = random_unit_vector(rng)
    noise_rad = np.deg2rad(rng.uniform(*cfg.orientation_noise_deg))
    q = quat_multiply(axis_angle_to_quat(noise_axis, noise_rad), pose.quaternion)
    q = quat_multiply(axis_angle_to_quat(state.orientation_bias_axis, state.orientation_bias_rad), q)
    return Pose(position, q)


def _replacement_pose(config: PoseNoiseConfig, rng: Stream) -> Pose:
    lo = np.asarray(config.replacement_min_m)
    hi = np.asarray(config.replacement_max_m)
    position = lo + rng.uniform(size=3) * (hi - lo)
    return Pose(position, uniform_quaternion(rng))


def corrupt_stream(poses, state: EpisodeNoiseState, rng: Stream) -> list[Pose]:
    """Corrupt a pose sequence step by step, advancing the episode state.

    Per step: consume a fresh (bias+noise) sample only every update_period
    steps, otherwise hold the last output; with jitter probability repeat
    the previous output instead (the fresh sample is dropped); with failure
    probability emit a uniformly random pose.
    """
    poses = list(poses)
    if not poses:
        raise ValidationError("corrupt_stream needs a non-empty pose sequence")
    out: list[Pose] = []
    for pose in poses:
        fresh = state.step % state.update_period == 0
        candidate = _noisy_pose(pose, state, rng) if fresh else state.held
        if state.held is not None and rng.uniform() < state.jitter_prob:
            emitted = state.held
        elif rng.uniform() < state.failure_prob:
            emitted = _replacement_pose(state.config, rng)
        else:
            emitted = candidate
        state.held = emitted
        state.step += 1
        out.append(emitted)
    return out


def pose_noise_config_to_dict(config: PoseNoiseConfig) -> dict:
    return {
        "update_period": list(config.update_period),
        "jitter_prob": list(config.jitter_prob),
        "failure_prob": list(config.failure_prob),
        "position_noise_mm": list(config.position_noise_mm),
        "position_bias_mm": list(config.position_bias_mm),
        "orientation_noise_deg": list(config.orientation_noise_deg),
        "orientation_bias_deg": list(config.orientation_bias_deg),
        "replacement_min_m": list(config.replacement_min_m),
        "replacement_max_m": list(config.replacement_max_m),
    }


def pose_noise_config_from_dict(d: dict) -> PoseNoiseConfig:
    known = pose_noise_config_to_dict(PoseNoiseConfig())
    unknown = set(d) - set(known)
    if unknown:
        raise ConfigError(f"pose noise config has unknown keys {sorted(unknown)}")
    kwargs = {k: tuple(v) for k, v in d.items()}
    return PoseNoiseConfig(**kwargs)


def read_pose_stream(path) -> list[Pose]:
    """JSONL of {step, position_m, quaternion_wxyz} records."""
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(pose_from_dict(json.loads(line)))
    return out


def write_pose_stream(path, poses) -> None:
    with open(path, "w") as f:
        for i, pose in enumerate(poses):
            f.write(json.dumps({"step": i, **pose_to_dict(pose)}) + "\n")


# --- image augmentation -------------------------------------------------------

_LUMA = np.array([0.299, 0.587, 0.114])  # Rec. 601 weights


@dataclass(frozen=True)
class ImageAugConfig:
    """Post-process image operator chain, applied in field order."""

    color_jitter_prob: float = 0.2
    color_jitter_range: tuple[float, float] = (0.8, 1.2)
    hue_prob: float = 0.2
    hue_range: tuple[float, float] = (-0.2, 0.2)  # fraction of a full hue turn
    brightness_prob: float = 0.5
    brightness_range: tuple[float, float] = (0.5, 1.5)
    contrast_prob: float = 0.5
    contrast_range: tuple[float, float] = (0.5, 1.5)
    gamma_prob: float = 0.5
    gamma_range: tuple[float, float] = (0.5, 1.5)
    saturation_prob: float = 0.5
    saturation_range: tuple[float, float] = (0.5, 1.5)
    iso_prob: float = 0.25
    iso_sigma_base: float = 0.02
    iso_sigma_luma: float = 0.05
    motion_blur_prob: float = 0.5
    motion_blur_kernel: tuple[int, int] = (3, 17)
    box_blur_prob: float = 0.5
    box_blur_kernel: tuple[int, int] = (3, 5)
    opening_prob: float = 1.0
    opening_kernel: int = 3

    def __post_init__(self):
        for name in (
            "color_jitter_prob",
            "hue_prob",
            "brightness_prob",
            "contrast_prob",
            "gamma_prob",
            "saturation_prob",
            "iso_prob",
            "motion_blur_prob",
            "box_blur_prob",
            "opening_prob",
        ):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"{name} {p} outside [0, 1]")
        for name in ("motion_blur_kernel", "box_blur_kernel"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise ConfigError(f"{name} range [{lo}, {hi}] malformed")
            if lo % 2 == 0 or hi % 2 == 0:
                raise ConfigError(f"{name} bounds must be odd")
        if self.opening_kernel % 2 == 0 or self.opening_kernel < 1:
            raise ConfigError("opening_kernel must be odd and positive")
        if self.gamma_range[0] <= 0:
            raise ConfigError("gamma_range must be strictly positive")


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        safe = np.where(delta > 0, delta, 1.0)
        h = np.where(
            maxc == r,
            (g - b) / safe,
            np.where(maxc == g, 2.0 + (b - r) / safe, 4.0 + (r - g) / safe),
        )
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    choices = [
        np.stack([v, t, p], -1),
        np.stack([q, v, p], -1),
        np.stack([p, v, t], -1),
        np.stack([p, q, v], -1),
        np.stack([t, p, v], -1),
        np.stack([v, p, q], -1),
    ]
    out = np.choose(i[..., None], choices)
    return out


def _motion_blur_kernel(length: int, angle_rad: float) -> np.ndarray:
    """Normalized 1D line kernel rasterized with bilinear deposition."""
    k = np.zeros((length, length))
    center = (length - 1) / 2.0
    cos_a, sin_a = np.cos(angle_rad), np.sin(angle_rad)
    for i in range(length):
        off = i - center
        x = center + off * cos_a
        y = center + off * sin_a
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        fx, fy = x - x0, y - y0
        for dx, dy, wgt in (
            (0, 0, (1 - fx) * (1 - fy)),
            (1, 0, fx * (1 - fy)),
            (0, 1, (1 - fx) * fy),
            (1, 1, fx * fy),
        ):
            xx, yy = x0 + dx, y0 + dy
            if 0 <= xx < length and 0 <= yy < length and wgt > 0:
                k[yy, xx] += wgt
    return k / k.sum()


def _convolve_rgb(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # constant-zero boundary: blur smears energy out of the frame
    out = np.empty_like(image)
    for c in range(3):
        out[..., c] = ndimage.convolve(image[..., c], kernel, mode="constant", cval=0.0)
    return out


def _odd_in_range(rng: Stream, lo: int, hi: int) -> int:
    n_choices = (hi - lo) // 2 + 1
    return lo + 2 * rng.integers(n_choices)


def augment_image(
    image: np.ndarray, object_mask: np.ndarray, config: ImageAugConfig, rng: Stream
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the gated operator chain; returns (image', mask').

    Only binary opening touches the mask. Every pixel result is clamped to
    [0, 1] after each operator.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError("augment_image expects an (H, W, 3) image")
    mask = np.asarray(object_mask, dtype=bool)
    if mask.shape != img.shape[:2]:
        raise ValidationError("object mask shape does not match image")
    img = np.clip(img, 0.0, 1.0)

    if rng.uniform() < config.color_jitter_prob:
        scale = rng.uniform(*config.color_jitter_range, size=3)
        img = np.clip(img * scale, 0.0, 1.0)

    if rng.uniform() < config.hue_prob:
        shift = rng.uniform(*config.hue_range)
        hsv = _rgb_to_hsv(img)
        hsv[..., 0] = (hsv[..., 0] + shift) % 1.0
        img = np.clip(_hsv_to_rgb(hsv), 0.0, 1.0)

    if rng.uniform() < config.brightness_prob:
        img = np.clip(img * rng.uniform(*config.brightness_range), 0.0, 1.0)

    if rng.uniform() < config.contrast_prob:
        c = rng.uniform(*config.contrast_range)
        mean_luma = float((img @ _LUMA).mean())
        img = np.clip(mean_luma + (img - mean_luma) * c, 0.0, 1.0)

    if rng.uniform() < config.gamma_prob:
        img = np.power(img, rng.uniform(*config.gamma_range))

    if rng.uniform() < config.saturation_prob:
        s = rng.uniform(*config.saturation_range)
        luma = (img @ _LUMA)[..., None]
        img = np.clip(luma + (img - luma) * s, 0.0, 1.0)

    if rng.uniform() < config.iso_prob:
        luma = img @ _LUMA
        sigma = config.iso_sigma_base + config.iso_sigma_luma * np.sqrt(luma)
        noise = rng.normal(size=img.shape) * sigma[..., None]
        img = np.clip(img + noise, 0.0, 1.0)

    if rng.uniform() < config.motion_blur_prob:
        length = _odd_in_range(rng, *config.motion_blur_kernel)
        angle = rng.uniform(0.0, np.pi)
        img = np.clip(_convolve_rgb(img, _motion_blur_kernel(length, angle)), 0.0, 1.0)

    if rng.uniform() < config.box_blur_prob:
        size = _odd_in_range(rng, *config.box_blur_kernel)
        img = np.clip(_convolve_rgb(img, np.ones((size, size)) / (size * size)), 0.0, 1.0)

    if rng.uniform() < config.opening_prob:
        k = config.opening_kernel
        mask = ndimage.binary_opening(mask, structure=np.ones((k, k), dtype=bool))

    return img, mask


def image_aug_config_to_dict(config: ImageAugConfig) -> dict:
    out = {}
    for name in ImageAugConfig.__dataclass_fields__:
        v = getattr(config, name)
        out[name] = list(v) if isinstance(v, tuple) else v
    return out


def image_aug_config_from_dict(d: dict) -> ImageAugConfig:
    fields = ImageAugConfig.__dataclass_fields__
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(f"image aug config has unknown keys {sorted(unknown)}")
    kwargs = {}
    for k, v in d.items():
        default = getattr(ImageAugConfig(), k)
        kwargs[k] = tuple(v) if isinstance(default, tuple) else type(default)(v)
    return ImageAugConfig(**kwargs)
