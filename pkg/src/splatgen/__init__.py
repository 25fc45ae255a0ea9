"""splatgen: synthetic pose-annotated datasets from 3D Gaussian splat scenes.

Pipeline in one line: load splat scene -> cluster -> perturb SH coefficients
-> render RGB/depth object-centrically -> raycast occluders and mask ->
post-process -> emit images, 2.5D keypoint labels, and pose metrics.
"""

__version__ = "0.1.0"

from .augment import (
    AugmentationLayer,
    AugmentationStack,
    apply_layer,
    apply_stack,
    default_stack,
    load_stack,
)
from .camera import Camera, look_down_z_camera, object_centric_camera
from .clustering import ClusterAssignment, color_clusters, kmeans, spatial_clusters
from .composite import (
    OcclusionResult,
    TriangleMesh,
    composite_frame,
    load_obj,
    occlusion_mask,
    raycast_depth,
)
from .errors import ConfigError, EstimationError, SchemaError, SplatgenError, ValidationError
from .labels import (
    KeypointSet,
    LabelRecord,
    accuracy,
    add_metric,
    canonical_keypoints,
    evaluate_poses,
    pearson,
    pose_errors,
    procrustes_pose,
    project_keypoints,
)
from .noise import (
    EpisodeNoiseState,
    ImageAugConfig,
    PoseNoiseConfig,
    augment_image,
    corrupt_stream,
    init_episode,
)
from .pipeline import JobConfig, Manifest, TrajectoryFrame, bench, generate, load_job_config
from .render import RenderOutput, eval_sh, project_gaussian, rasterize
from .rng import Stream, derive
from .scene import GaussianScene, SceneStats, load_ply, make_scene, save_ply, scene_stats
from .transforms import Pose

__all__ = [
    "__version__",
    "AugmentationLayer",
    "AugmentationStack",
    "Camera",
    "ClusterAssignment",
    "ConfigError",
    "EpisodeNoiseState",
    "EstimationError",
    "GaussianScene",
    "ImageAugConfig",
    "JobConfig",
    "KeypointSet",
    "LabelRecord",
    "Manifest",
    "OcclusionResult",
    "Pose",
    "PoseNoiseConfig",
    "RenderOutput",
    "SceneStats",
    "SchemaError",
    "SplatgenError",
    "Stream",
    "TrajectoryFrame",
    "TriangleMesh",
    "ValidationError",
    "accuracy",
    "add_metric",
    "apply_layer",
    "apply_stack",
    "augment_image",
    "bench",
    "canonical_keypoints",
    "color_clusters",
    "composite_frame",
    "corrupt_stream",
    "default_stack",
    "derive",
    "eval_sh",
    "evaluate_poses",
    "generate",
    "init_episode",
    "kmeans",
    "load_job_config",
    "load_obj",
    "load_ply",
    "load_stack",
    "look_down_z_camera",
    "make_scene",
    "object_centric_camera",
    "occlusion_mask",
    "pearson",
    "pose_errors",
    "procrustes_pose",
    "project_gaussian",
    "project_keypoints",
    "rasterize",
    "raycast_depth",
    "save_ply",
    "scene_stats",
    "spatial_clusters",
]
