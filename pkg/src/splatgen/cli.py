"""Command-line entry points.

Exit codes: 0 success, 2 validation/config error, 1 runtime error. Logs go
to stderr; all data goes to files (or stdout for report-style output when
no --out is given).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .augment import apply_stack, load_stack
from .camera import camera_from_dict, object_centric_camera
from .clustering import DEFAULT_COLOR_K, DEFAULT_SPATIAL_K, color_clusters, spatial_clusters
from .errors import ConfigError, SchemaError, SplatgenError, ValidationError
from .imageio import write_pfm, write_png
from .labels import evaluate_poses, read_labels
from .noise import corrupt_stream, init_episode, pose_noise_config_from_dict, read_pose_stream, write_pose_stream
from .pipeline import (
    STAGE_AUGMENT,
    STAGE_CLUSTER_COLOR,
    STAGE_CLUSTER_SPATIAL,
    bench,
    generate,
    load_job_config,
)
from .render import rasterize
from .rng import Stream, derive
from .scene import load_ply, save_ply
from .transforms import pose_from_dict


def _load_json(path):
    with open(path) as f:
        return json.load(f)


def _emit(report: dict, out_path: str | None) -> None:
    text = json.dumps(report, indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _cmd_generate(args) -> int:
    config = load_job_config(args.config, overrides={"seed": args.seed, "output": args.out})
    manifest = generate(config)
    print(f"wrote {len(manifest.entries)} frames to {config.output}", file=sys.stderr)
    return 0


def _cmd_augment(args) -> int:
    scene = load_ply(args.scene)
    stack = load_stack(args.stack)
    spatial = spatial_clusters(scene, DEFAULT_SPATIAL_K, derive(args.seed, STAGE_CLUSTER_SPATIAL))
    color = color_clusters(scene, DEFAULT_COLOR_K, derive(args.seed, STAGE_CLUSTER_COLOR))
    out = apply_stack(scene, spatial, color, stack, Stream(derive(args.seed, STAGE_AUGMENT, 0)))
    save_ply(out, args.out)
    print(f"augmented {scene.count} Gaussians -> {args.out}", file=sys.stderr)
    return 0


def _cmd_render(args) -> int:
    scene = load_ply(args.scene)
    camera = camera_from_dict(_load_json(args.camera))
    if args.pose:
        camera = object_centric_camera(camera, pose_from_dict(_load_json(args.pose)))
    result = rasterize(scene, camera)
    write_png(args.out, np.where(result.alpha[..., None] > 0, result.rgb, 0.0))
    if args.depth:
        write_pfm(args.depth, result.depth)
    print(f"rendered {camera.width}x{camera.height} -> {args.out}", file=sys.stderr)
    return 0


def _cmd_corrupt(args) -> int:
    poses = read_pose_stream(args.poses)
    config = pose_noise_config_from_dict(_load_json(args.noise_config))
    rng = Stream(args.seed)
    state = init_episode(config, rng)
    write_pose_stream(args.out, corrupt_stream(poses, state, rng))
    print(f"corrupted {len(poses)} poses -> {args.out}", file=sys.stderr)
    return 0


def _read_pose_file(path):
    """Poses plus optional occlusion ratios from label or pose-stream JSONL."""
    with open(path) as f:
        first = ""
        for line in f:
            if line.strip():
                first = line
                break
    if not first:
        raise ValidationError(f"{path} is empty")
    if "pose" in json.loads(first):
        records = read_labels(path)
        return [r.pose for r in records], [r.occlusion_ratio for r in records]
    return read_pose_stream(path), None


def _cmd_eval(args) -> int:
    pred, _ = _read_pose_file(args.pred)
    gt, gt_occ = _read_pose_file(args.gt)
    model_points = np.asarray(_load_json(args.model_points), dtype=np.float64)
    occlusion = None
    if args.occlusion:
        occlusion = np.asarray(_load_json(args.occlusion), dtype=np.float64)
    elif gt_occ is not None:
        occlusion = np.asarray(gt_occ)
    report = evaluate_poses(pred, gt, model_points, occlusion)
    _emit(report, args.out)
    return 0


def _cmd_bench(args) -> int:
    scene = load_ply(args.scene)
    stack = load_stack(args.stack)
    report = bench(scene, stack, args.iterations, width=args.width, height=args.height, seed=args.seed)
    _emit(report, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splatgen", description="Gaussian-splat synthetic dataset engine")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run a dataset generation job")
    g.add_argument("--config", required=True, help="job config JSON")
    g.add_argument("--seed", type=int, default=None, help="override the config seed")
    g.add_argument("--out", default=None, help="override the output directory")
    g.set_defaults(func=_cmd_generate)

    a = sub.add_parser("augment", help="apply an augmentation stack to a scene")
    a.add_argument("--scene", required=True)
    a.add_argument("--stack", default="table1", help="stack name or JSON path")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True, help="output PLY path")
    a.set_defaults(func=_cmd_augment)

    r = sub.add_parser("render", help="rasterize a scene from a camera")
    r.add_argument("--scene", required=True)
    r.add_argument("--camera", required=True, help="camera JSON path")
    r.add_argument("--pose", default=None, help="object pose JSON (object-centric render)")
    r.add_argument("--out", required=True, help="output PNG path")
    r.add_argument("--depth", default=None, help="optional output PFM depth path")
    r.set_defaults(func=_cmd_render)

    c = sub.add_parser("corrupt", help="corrupt a pose stream with perception noise")
    c.add_argument("--poses", required=True, help="input pose JSONL")
    c.add_argument("--noise-config", required=True, help="noise config JSON")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True, help="output pose JSONL")
    c.set_defaults(func=_cmd_corrupt)

    e = sub.add_parser("eval", help="pose accuracy metrics between two sequences")
    e.add_argument("--pred", required=True, help="predicted poses (labels or pose JSONL)")
    e.add_argument("--gt", required=True, help="ground-truth poses (labels or pose JSONL)")
    e.add_argument("--model-points", required=True, help="JSON array of [x,y,z] model points")
    e.add_argument("--occlusion", default=None, help="JSON array of per-frame occlusion ratios")
    e.add_argument("--out", default=None, help="report JSON path (stdout when omitted)")
    e.set_defaults(func=_cmd_eval)

    b = sub.add_parser("bench", help="time apply_stack against rasterize")
    b.add_argument("--scene", required=True)
    b.add_argument("--stack", default="table1")
    b.add_argument("--iterations", type=int, required=True)
    b.add_argument("--width", type=int, default=120)
    b.add_argument("--height", type=int, default=120)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None, help="report JSON path (stdout when omitted)")
    b.set_defaults(func=_cmd_bench)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SplatgenError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())
