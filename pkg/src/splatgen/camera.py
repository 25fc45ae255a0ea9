"""Pinhole camera and the object-centric viewpoint trick.

The camera frame looks along +z; a point at camera-frame (x, y, z) lands at
pixel (fx*x/z + cx, fy*y/z + cy). world_from_camera maps camera coordinates
into the world.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .transforms import Pose


@dataclass(frozen=True)
class Camera:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    world_from_camera: Pose
    near: float = 0.01
    far: float = 100.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("camera needs positive pixel dimensions")
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")
        if not (0.0 < self.near < self.far):
            raise ValidationError("need 0 < near < far")

    @property
    def center(self) -> np.ndarray:
        return self.world_from_camera.position

    def camera_from_world(self) -> tuple[np.ndarray, np.ndarray]:
        """Rotation matrix + translation mapping world points to camera frame."""
        r = self.world_from_camera.rotation_matrix()
        return r.T, -(r.T @ self.world_from_camera.position)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        r, t = self.camera_from_world()
        return np.asarray(points, dtype=np.float64) @ r.T + t

    def pixel_ray_directions(self) -> np.ndarray:
        """Per-pixel-center ray directions in camera frame, z-component 1.

        Shape (H, W, 3); the ray parameter of a hit equals its camera-frame
        depth because dz = 1.
        """
        xs = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        ys = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy, np.ones_like(gx)], axis=-1)


def object_centric_camera(camera: Camera, object_pose: Pose) -> Camera:
    """Viewpoint that renders a static scene as if the object moved.

    Applying the inverse object transform to the camera keeps the splat
    scene fixed: rendering from the returned camera equals rendering the
    rigidly moved object from the original one.
    """
    adjusted = object_pose.inverse().compose(camera.world_from_camera)
    return replace(camera, world_from_camera=adjusted)


def camera_from_dict(d: dict, default_size: tuple[int, int] | None = None) -> Camera:
    """Build a camera from its JSON form; resolution may come from outside."""
    d = dict(d)
    width = d.pop("width", default_size[0] if default_size else None)
    height = d.pop("height", default_size[1] if default_size else None)
    if width is None or height is None:
        raise ValidationError("camera spec needs width/height or a default resolution")
    pose = Pose(
        np.asarray(d.pop("position_m", (0.0, 0.0, 0.0)), dtype=np.float64),
        np.asarray(d.pop("quaternion_wxyz", (1.0, 0.0, 0.0, 0.0)), dtype=np.float64),
    )
    try:
        cam = Camera(
            width=int(width),
            height=int(height),
            fx=float(d.pop("fx")),
            fy=float(d.pop("fy")),
            cx=float(d.pop("cx")),
            cy=float(d.pop("cy")),
            world_from_camera=pose,
            near=float(d.pop("near", 0.01)),
            far=float(d.pop("far", 100.0)),
        )
    except KeyError as e:
        raise ValidationError(f"camera spec missing key {e}") from e
    if d:
        raise ValidationError(f"camera spec has unknown keys {sorted(d)}")
    return cam


def camera_to_dict(camera: Camera) -> dict:
    return {
        "width": camera.width,
        "height": camera.height,
        "fx": camera.fx,
        "fy": camera.fy,
        "cx": camera.cx,
        "cy": camera.cy,
        "near": camera.near,
        "far": camera.far,
        "position_m": [float(v) for v in camera.world_from_camera.position],
        "quaternion_wxyz": [float(v) for v in camera.world_from_camera.quaternion],
    }


def look_down_z_camera(
    center: np.ndarray,
    distance: float,
    width: int,
    height: int,
    fov_deg: float = 50.0,
    near: float = 0.01,
    far: float = 100.0,
) -> Camera:
    """Camera on the -z side of `center`, looking along +z at it."""
    f = 0.5 * width / np.tan(np.deg2rad(fov_deg) / 2.0)
    pose = Pose(np.asarray(center, dtype=np.float64) - np.array([0.0, 0.0, distance]), np.array([1.0, 0.0, 0.0, 0.0]))
    return Camera(width, height, f, f, width / 2.0, height / 2.0, pose, near, far)
