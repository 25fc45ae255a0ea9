"""Stochastic pre-rasterization perturbation of SH coefficients.

Each layer fires with probability p_aug; inside a fired layer every cluster
independently fires with probability p_cluster and receives one shared
delta, either added to or multiplied into the targeted coefficients. The
random-noise group treats every Gaussian as its own cluster; the
global-shift group treats the whole scene as one. Geometry buffers are
never touched, and nothing is clamped: the renderer's sigmoid bounds the
final color.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterAssignment
from .errors import ConfigError, ValidationError
from .rng import Stream
from .scene import GaussianScene

GROUPS = ("random_noise", "spatial_cluster", "color_cluster", "global_shift")
TARGETS = ("sh0", "shn")
OPS = ("additive", "scaling")


@dataclass(frozen=True)
class AugmentationLayer:
    group: str
    targets: tuple[str, ...]
    op: str
    probability: float  # p_aug: chance the whole layer fires
    fraction: float  # p_cluster: chance each cluster fires
    range: tuple[float, float]  # delta sampled uniformly from [lo, hi]
    uniform: bool = False  # True: one scalar delta; False: one delta per dim

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ConfigError(f"unknown augmentation group '{self.group}'")
        if self.op not in OPS:
            raise ConfigError(f"unknown augmentation op '{self.op}'")
        targets = tuple(self.targets)
        if not targets or any(t not in TARGETS for t in targets):
            raise ConfigError(f"layer targets must be a non-empty subset of {TARGETS}")
        object.__setattr__(self, "targets", targets)
        lo, hi = self.range
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise ConfigError(f"malformed delta range [{lo}, {hi}]")
        object.__setattr__(self, "range", (float(lo), float(hi)))
        if self.op == "scaling" and lo <= 0.0:
            raise ConfigError("scaling range must be strictly positive")
        for name, p in (("probability", self.probability), ("fraction", self.fraction)):
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"layer {name} {p} outside [0, 1]")


@dataclass(frozen=True)
class AugmentationStack:
    layers: tuple[AugmentationLayer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)


def default_stack() -> AugmentationStack:
    """The standard eleven-layer perturbation stack ("table1")."""

    def layer(group, targets, op, p, frac, rng, uniform=False):
        return AugmentationLayer(group, targets, op, p, frac, rng, uniform)

    both = ("sh0", "shn")
    return AugmentationStack(
        (
            layer("random_noise", both, "additive", 0.2, 1.0, (-0.1, 0.1)),
            layer("random_noise", both, "scaling", 0.2, 1.0, (0.8, 1.2)),
            layer("spatial_cluster", both, "additive", 0.8, 0.10, (-0.1, 0.1)),
            layer("spatial_cluster", both, "scaling", 0.8, 0.20, (0.9, 1.1)),
            layer("color_cluster", ("sh0",), "additive", 0.8, 0.10, (-0.2, 0.2)),
            layer("color_cluster", ("shn",), "additive", 0.8, 0.10, (-0.1, 0.1)),
            layer("color_cluster", both, "scaling", 0.8, 0.10, (0.6, 1.4)),
            layer("global_shift", ("shn",), "additive", 0.2, 1.0, (-0.1, 0.1)),
            layer("global_shift", both, "scaling", 0.2, 1.0, (0.6, 1.4)),
            layer("global_shift", both, "additive", 0.8, 1.0, (-0.2, 0.2), uniform=True),
            layer("global_shift", ("sh0",), "scaling", 0.8, 1.0, (0.9, 1.4), uniform=True),
        )
    )


NAMED_STACKS = {"table1": default_stack}


def _target_dims(layer: AugmentationLayer) -> int:
    dims = 0
    if "sh0" in layer.targets:
        dims += 3
    if "shn" in layer.targets:
        dims += 45
    return dims


def apply_layer(
    sh0: np.ndarray,
    sh_rest: np.ndarray,
    assignment: ClusterAssignment,
    layer: AugmentationLayer,
    rng: Stream,
) -> tuple[np.ndarray, np.ndarray]:
    """Perturb SH buffers in place according to one layer; returns them.

    Draw order per layer stream: 1 layer gate, k cluster gates, then the
    delta block for all k clusters (uniform: (k,), otherwise (k, dims)).
    """
    n = sh0.shape[0]
    labels = assignment.labels
    if labels.shape[0] != n:
        raise ValidationError("cluster assignment does not cover the scene")
    if labels.size and (labels.min() < 0 or labels.max() >= assignment.k):
        raise ValidationError("cluster label out of range")

    if rng.uniform() > layer.probability:
        return sh0, sh_rest

    k = assignment.k
    gates = rng.uniform(size=k) <= layer.fraction
    dims = 1 if layer.uniform else _target_dims(layer)
    lo, hi = layer.range
    # sampled as 53-bit doubles per the stream contract, applied in the
    # buffers' own precision
    deltas = rng.uniform(lo, hi, size=(k, dims)).astype(sh0.dtype)

    fired = gates[labels]
    if not fired.any():
        return sh0, sh_rest
    per_point = deltas[labels[fired]]  # (M, dims); rows identical within a cluster

    col = 0
    for target, buf, width in (("sh0", sh0, 3), ("shn", sh_rest, 45)):
        if target not in layer.targets:
            continue
        d = per_point if layer.uniform else per_point[:, col : col + width]
        if layer.op == "additive":
            buf[fired] += d
        else:
            buf[fired] *= d
        col += width
    return sh0, sh_rest


def _assignment_for(
    layer: AugmentationLayer, n: int, spatial: ClusterAssignment, color: ClusterAssignment
) -> ClusterAssignment:
    if layer.group == "spatial_cluster":
        return spatial
    if layer.group == "color_cluster":
        return color
    if layer.group == "random_noise":
        return ClusterAssignment.per_point(n)
    return ClusterAssignment.whole_scene(n)


def apply_stack(
    scene: GaussianScene,
    spatial: ClusterAssignment,
    color: ClusterAssignment,
    stack: AugmentationStack,
    rng: Stream,
) -> GaussianScene:
    """Apply layers in order to a copy of the scene's SH buffers.

    Layer i consumes sub-stream rng.child(i), so a stack's output only
    depends on (scene, assignments, stack, stream key).
    """
    sh0 = scene.sh0.astype(np.float32).copy()
    sh_rest = scene.sh_rest.astype(np.float32).copy()
    n = scene.count
    for i, layer in enumerate(stack):
        assignment = _assignment_for(layer, n, spatial, color)
        apply_layer(sh0, sh_rest, assignment, layer, rng.child(i))
    return scene.with_sh(sh0, sh_rest)


# --- JSON (de)serialization -------------------------------------------------

def layer_to_dict(layer: AugmentationLayer) -> dict:
    return {
        "group": layer.group,
        "targets": list(layer.targets),
        "op": layer.op,
        "uniform": layer.uniform,
        "probability": layer.probability,
        "fraction": layer.fraction,
        "range": list(layer.range),
    }


def layer_from_dict(d: dict) -> AugmentationLayer:
    try:
        return AugmentationLayer(
            group=d["group"],
            targets=tuple(d["targets"]),
            op=d["op"],
            probability=float(d["probability"]),
            fraction=float(d["fraction"]),
            range=(float(d["range"][0]), float(d["range"][1])),
            uniform=bool(d.get("uniform", False)),
        )
    except KeyError as e:
        raise ConfigError(f"augmentation layer missing key {e}") from e


def stack_to_dict(stack: AugmentationStack) -> dict:
    return {"layers": [layer_to_dict(l) for l in stack]}


def stack_from_dict(d: dict) -> AugmentationStack:
    if "layers" not in d or not isinstance(d["layers"], list):
        raise ConfigError("augmentation stack JSON needs a 'layers' list")
    return AugmentationStack(tuple(layer_from_dict(l) for l in d["layers"]))


def load_stack(spec) -> AugmentationStack:
    """Resolve a stack from a name ('table1'), a JSON file path, or a dict."""
    if isinstance(spec, AugmentationStack):
        return spec
    if isinstance(spec, dict):
        return stack_from_dict(spec)
    if isinstance(spec, str):
        if spec in NAMED_STACKS:
            return NAMED_STACKS[spec]()
        try:
            with open(spec) as f:
                return stack_from_dict(json.load(f))
        except FileNotFoundError as e:
            raise ConfigError(f"unknown stack name or missing file '{spec}'") from e
    raise ConfigError(f"cannot interpret augmentation stack spec {spec!r}")
