"""Dataset generation jobs: config, trajectories, manifest, bench.

Every random decision is keyed by (master seed, stage, frame), so frames
are independent work units and a job's output is byte-stable across runs
and across worker-thread counts.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .augment import NAMED_STACKS, AugmentationStack, apply_stack, load_stack, stack_to_dict
from .camera import Camera, camera_from_dict, look_down_z_camera, object_centric_camera
from .clustering import (
    DEFAULT_COLOR_K,
    DEFAULT_SPATIAL_K,
    ClusterAssignment,
    color_clusters,
    spatial_clusters,
)
from .composite import TriangleMesh, composite_frame, load_obj, occlusion_mask, raycast_depth
from .errors import ConfigError, SplatgenError, ValidationError
from .imageio import read_png, write_mask_png, write_png, write_pfm
from .labels import LabelRecord, canonical_keypoints, label_to_dict, project_keypoints
from .noise import (
    ImageAugConfig,
    PoseNoiseConfig,
    augment_image,
    corrupt_stream,
    image_aug_config_from_dict,
    init_episode,
    pose_noise_config_from_dict,
    write_pose_stream,
)
from .render import rasterize
from .rng import Stream, derive
from .scene import GaussianScene, load_ply, scene_stats
from .transforms import Pose, pose_from_dict

# Stage keys for RNG sub-stream derivation.
STAGE_AUGMENT = 1
STAGE_IMAGE_AUG = 2
STAGE_POSE_NOISE = 3
STAGE_CLUSTER_SPATIAL = 4
STAGE_CLUSTER_COLOR = 5

DEFAULT_RESOLUTION = (120, 120)
MIN_RESOLUTION = 16

_JOB_KEYS = {
    "scene",
    "occluders",
    "trajectory",
    "resolution",
    "camera",
    "augmentation",
    "image_augmentation",
    "pose_noise",
    "background",
    "seed",
    "output",
}


@dataclass
class JobConfig:
    scene_path: str
    trajectory_path: str
    camera: Camera
    occluder_paths: list[str]
    resolution: tuple[int, int]
    stack: AugmentationStack | None
    image_aug: ImageAugConfig | None
    pose_noise: PoseNoiseConfig | None
    background: np.ndarray | str  # RGB triple or image path
    seed: int
    output: str
    raw: dict  # normalized config dict, hashed into the manifest


@dataclass(frozen=True)
class TrajectoryFrame:
    frame_id: int
    object_pose: Pose
    occluder_poses: tuple[Pose, ...]


@dataclass
class Manifest:
    config_hash: str
    master_seed: int
    version: str
    entries: list[dict]

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "version": self.version,
            "entries": self.entries,
        }


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


def load_job_config(source, base_dir: str | None = None, overrides: dict | None = None) -> JobConfig:
    """Parse and validate a job config from a path or a dict.

    Unknown keys are rejected; referenced files must exist. `overrides`
    (seed/output) lets the CLI flags win over the file.
    """
    if isinstance(source, (str, os.PathLike)):
        base_dir = base_dir or os.path.dirname(os.path.abspath(source))
        with open(source) as f:
            raw = json.load(f)
    else:
        raw = dict(source)
        base_dir = base_dir or "."
    if not isinstance(raw, dict):
        raise ConfigError("job config must be a JSON object")
    unknown = set(raw) - _JOB_KEYS
    if unknown:
        raise ConfigError(f"job config has unknown keys {sorted(unknown)}")
    if overrides:
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    try:
        scene_path = resolve(raw["scene"])
        trajectory_path = resolve(raw["trajectory"])
        camera_spec = raw["camera"]
    except KeyError as e:
        raise ConfigError(f"job config missing required key {e}") from e

    resolution = tuple(int(v) for v in raw.get("resolution", DEFAULT_RESOLUTION))
    if len(resolution) != 2 or min(resolution) < MIN_RESOLUTION:
        raise ConfigError(f"resolution must be [w, h] with both >= {MIN_RESOLUTION}")

    for p in (scene_path, trajectory_path):
        if not os.path.exists(p):
            raise ConfigError(f"referenced file does not exist: {p}")
    occluders = [resolve(p) for p in raw.get("occluders", [])]
    for p in occluders:
        if not os.path.exists(p):
            raise ConfigError(f"occluder mesh does not exist: {p}")

    try:
        camera = camera_from_dict(camera_spec, default_size=resolution)
    except ValidationError as e:
        raise ConfigError(str(e)) from e

    stack_spec = raw.get("augmentation")
    stack = None
    if stack_spec is not None:
        if isinstance(stack_spec, str) and stack_spec not in NAMED_STACKS:
            stack_spec = resolve(stack_spec)
        stack = load_stack(stack_spec)

    image_spec = raw.get("image_augmentation")
    if image_spec is None:
        image_aug = None
    elif image_spec == "default":
        image_aug = ImageAugConfig()
    elif isinstance(image_spec, dict):
        image_aug = image_aug_config_from_dict(image_spec)
    else:
        raise ConfigError("image_augmentation must be null, 'default', or an object")

    noise_spec = raw.get("pose_noise")
    pose_noise = pose_noise_config_from_dict(noise_spec) if noise_spec is not None else None

    background = raw.get("background", [0.0, 0.0, 0.0])
    if isinstance(background, str):
        background = resolve(background)
        if not os.path.exists(background):
            raise ConfigError(f"background image does not exist: {background}")
    else:
        background = np.asarray(background, dtype=np.float64)
        if background.shape != (3,):
            raise ConfigError("background color must be an [r, g, b] triple")

    seed = int(raw.get("seed", 0))
    output = raw.get("output", "dataset")
    output = output if os.path.isabs(output) else os.path.join(base_dir, output)

    # the hashable config: everything that shapes dataset content (the
    # output directory is deliberately excluded)
    normalized = {k: v for k, v in raw.items() if k != "output"}
    normalized.setdefault("resolution", list(resolution))
    normalized.setdefault("seed", seed)
    if stack is not None:
        normalized["augmentation"] = stack_to_dict(stack)

    return JobConfig(
        scene_path=scene_path,
        trajectory_path=trajectory_path,
        camera=camera,
        occluder_paths=occluders,
        resolution=resolution,
        stack=stack,
        image_aug=image_aug,
        pose_noise=pose_noise,
        background=background,
        seed=seed,
        output=output,
        raw=normalized,
    )


def load_trajectory(path, n_occluders: int) -> list[TrajectoryFrame]:
    """JSONL trajectory; frame ids must strictly increase and every frame
    must carry one pose per occluder mesh."""
    frames: list[TrajectoryFrame] = []
    last_id = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
                fid = int(d["frame_id"])
                obj = pose_from_dict(d["object_pose"])
                occ = tuple(pose_from_dict(p) for p in d.get("occluder_poses", []))
            except (KeyError, ValueError, TypeError) as e:
                raise ValidationError(f"trajectory line {lineno}: {e}") from e
            if last_id is not None and fid <= last_id:
                raise ValidationError(f"trajectory line {lineno}: frame ids must strictly increase")
            if len(occ) != n_occluders:
                raise ValidationError(
                    f"trajectory line {lineno}: {len(occ)} occluder poses for {n_occluders} meshes"
                )
            last_id = fid
            frames.append(TrajectoryFrame(fid, obj, occ))
    if not frames:
        raise ValidationError("trajectory is empty")
    return frames


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SPLATGEN_THREADS", "1")))
    except ValueError:
        return 1


def _render_frame(
    frame: TrajectoryFrame,
    scene: GaussianScene,
    spatial: ClusterAssignment,
    color: ClusterAssignment,
    config: JobConfig,
    background,
    meshes: list[TriangleMesh],
    kps,
    out_dir: str,
) -> tuple[dict, LabelRecord]:
    seed = config.seed
    fid = frame.frame_id

    if config.stack is not None and len(config.stack):
        frame_scene = apply_stack(
            scene, spatial, color, config.stack, Stream(derive(seed, STAGE_AUGMENT, fid))
        )
    else:
        frame_scene = scene

    cam = object_centric_camera(config.camera, frame.object_pose)
    render = rasterize(frame_scene, cam)

    d_phys = np.full(render.depth.shape, np.inf)
    for mesh, occ_pose in zip(meshes, frame.occluder_poses):
        np.minimum(d_phys, raycast_depth(mesh, occ_pose, config.camera), out=d_phys)
    occ = occlusion_mask(d_phys, render)
    image, mask = composite_frame(render, occ, background)

    if config.image_aug is not None:
        image, mask = augment_image(
            image, mask, config.image_aug, Stream(derive(seed, STAGE_IMAGE_AUG, fid))
        )

    uvd, valid = project_keypoints(kps, frame.object_pose, config.camera)
    if not valid.all():
        raise ValidationError("keypoint behind the camera; object pose leaves the frustum")
    pose_cam = config.camera.world_from_camera.inverse().compose(frame.object_pose)
    label = LabelRecord(fid, pose_cam, uvd, occ.occlusion_ratio)

    image_path = f"frame_{fid:06d}.png"
    depth_path = f"frame_{fid:06d}_depth.pfm"
    mask_path = f"frame_{fid:06d}_mask.png"
    write_png(os.path.join(out_dir, image_path), image)
    write_pfm(os.path.join(out_dir, depth_path), render.depth)
    write_mask_png(os.path.join(out_dir, mask_path), mask)

    entry = {
        "frame_id": fid,
        "image_path": image_path,
        "depth_path": depth_path,
        "mask_path": mask_path,
        "label_path": "labels.jsonl",
        "occlusion_ratio": occ.occlusion_ratio,
    }
    return entry, label


def generate(config: JobConfig) -> Manifest:
    """Run a dataset job; returns the manifest it also writes to disk.

    A `.incomplete` marker exists inside the output directory for the
    duration of the run and is removed on success.
    """
    scene = load_ply(config.scene_path)
    meshes = [load_obj(p) for p in config.occluder_paths]
    frames = load_trajectory(config.trajectory_path, len(meshes))
    background = config.background
    if isinstance(background, str):
        background = read_png(background)
        if background.shape[:2] != (config.camera.height, config.camera.width):
            raise ConfigError("background image resolution does not match render resolution")

    needs_clusters = config.stack is not None and any(
        l.group in ("spatial_cluster", "color_cluster") for l in (config.stack or ())
    )
    if needs_clusters:
        spatial = spatial_clusters(scene, DEFAULT_SPATIAL_K, derive(config.seed, STAGE_CLUSTER_SPATIAL))
        color = color_clusters(scene, DEFAULT_COLOR_K, derive(config.seed, STAGE_CLUSTER_COLOR))
    else:
        spatial = color = ClusterAssignment.whole_scene(scene.count)
    kps = canonical_keypoints(scene)

    out_dir = config.output
    os.makedirs(out_dir, exist_ok=True)
    marker = os.path.join(out_dir, ".incomplete")
    with open(marker, "w") as f:
        f.write("generation in progress\n")

    def work(frame):
        try:
            return _render_frame(frame, scene, spatial, color, config, background, meshes, kps, out_dir)
        except SplatgenError as e:
            raise type(e)(f"frame {frame.frame_id}: {e}") from e

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, frames))
    else:
        results = [work(frame) for frame in frames]

    entries = [entry for entry, _ in results]
    labels = [label for _, label in results]
    with open(os.path.join(out_dir, "labels.jsonl"), "w") as f:
        for label in labels:
            f.write(json.dumps(label_to_dict(label)) + "\n")

    if config.pose_noise is not None:
        rng = Stream(derive(config.seed, STAGE_POSE_NOISE))
        state = init_episode(config.pose_noise, rng)
        noisy = corrupt_stream([fr.object_pose for fr in frames], state, rng)
        write_pose_stream(os.path.join(out_dir, "poses_noisy.jsonl"), noisy)

    manifest = Manifest(
        config_hash=config_hash(config.raw),
        master_seed=config.seed,
        version=__version__,
        entries=entries,
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest.to_dict(), f, indent=2)
        f.write("\n")
    os.remove(marker)
    return manifest


def bench(
    scene: GaussianScene,
    stack: AugmentationStack,
    iterations: int,
    width: int = 120,
    height: int = 120,
    camera: Camera | None = None,
    seed: int = 0,
) -> dict:
    """Wall-time comparison of SH augmentation against rasterization."""
    if iterations < 1:
        raise ValidationError("bench needs iterations >= 1")
    if camera is None:
        stats = scene_stats(scene)
        extent = float(np.linalg.norm(stats.aabb_max - stats.aabb_min))
        camera = look_down_z_camera(stats.centroid, max(3.0 * extent, 0.5), width, height)

    spatial = spatial_clusters(scene, DEFAULT_SPATIAL_K, derive(seed, STAGE_CLUSTER_SPATIAL))
    color = color_clusters(scene, DEFAULT_COLOR_K, derive(seed, STAGE_CLUSTER_COLOR))

    aug_times = []
    for i in range(iterations):
        rng = Stream(derive(seed, STAGE_AUGMENT, i))
        t0 = time.perf_counter()
        apply_stack(scene, spatial, color, stack, rng)
        aug_times.append(time.perf_counter() - t0)

    raster_times = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        rasterize(scene, camera)
        raster_times.append(time.perf_counter() - t0)

    aug_ms = np.asarray(aug_times) * 1000.0
    raster_ms = np.asarray(raster_times) * 1000.0
    return {
        "n_gaussians": scene.count,
        "resolution": [camera.width, camera.height],
        "iterations": iterations,
        "apply_stack_ms": {"mean": float(aug_ms.mean()), "median": float(np.median(aug_ms))},
        "rasterize_ms": {"mean": float(raster_ms.mean()), "median": float(np.median(raster_ms))},
        "ratio": float(aug_ms.mean() / raster_ms.mean()),
    }
