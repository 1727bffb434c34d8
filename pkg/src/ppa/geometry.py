"""Perspective camera model: intrinsics, poses, rays, rotations, planes.

Conventions
-----------
* Pixel coordinates are continuous, origin at the center of the top-left
  pixel; u grows right, v grows down.
* The camera frame is right-handed with x right, y down, z forward along
  the optical axis.  Viewing rays returned by :func:`pixel_to_ray` always
  have ``v_z > 0``.
* ``Pose.rotation`` maps world coordinates to camera coordinates:
  ``p_cam = R @ (p_world - center)`` and ``n_cam = R @ n_world``.
* Lengths are millimeters.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PolarimetryError

UNIT_TOL = 1e-12
ORTHONORMAL_TOL = 1e-10


def unit(v):
    """Normalize a vector (or an array of vectors along the last axis)."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise PolarimetryError("cannot normalize a zero vector")
    return v / n


def require_unit(v, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise PolarimetryError(f"{name} must be a 3-vector, got shape {v.shape}")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise PolarimetryError(f"{name} must have unit norm, got {np.linalg.norm(v)!r}")
    return v


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise PolarimetryError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise PolarimetryError("principal point must lie inside the image")

    def matrix(self):
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def contains(self, pixel):
        """True if a (sub-pixel) coordinate lies inside the image area."""
        u, v = float(pixel[0]), float(pixel[1])
        return (
            -0.5 <= u <= self.width - 0.5 and -0.5 <= v <= self.height - 0.5
        )

    def to_dict(self):
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )

    @classmethod
    def from_fov(cls, width, height, fov_deg):
        """Build square-pixel intrinsics from a horizontal field of view."""
        f = (width / 2.0) / np.tan(np.deg2rad(fov_deg) / 2.0)
        return cls(fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                   width=width, height=height)


def pixel_to_ray(intrinsics, pixel):
    """Back-project one pixel to the unit viewing ray v = K^-1 x / ||K^-1 x||."""
    if not intrinsics.contains(pixel):
        raise PolarimetryError(f"pixel {tuple(pixel)} outside image bounds")
    u, v = float(pixel[0]), float(pixel[1])
    d = np.array([(u - intrinsics.cx) / intrinsics.fx,
                  (v - intrinsics.cy) / intrinsics.fy,
                  1.0])
    return d / np.linalg.norm(d)


def pixel_rays(intrinsics, pixels):
    """Vectorized back-projection: (N, 2) pixels -> (N, 3) unit rays."""
    px = np.atleast_2d(np.asarray(pixels, dtype=float))
    x = (px[:, 0] - intrinsics.cx) / intrinsics.fx
    y = (px[:, 1] - intrinsics.cy) / intrinsics.fy
    d = np.stack([x, y, np.ones_like(x)], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def ray_grid(intrinsics):
    """Per-pixel unit rays of the full image as (vx, vy, vz) float arrays (H, W)."""
    u = np.arange(intrinsics.width, dtype=float)
    v = np.arange(intrinsics.height, dtype=float)
    x = (u - intrinsics.cx) / intrinsics.fx
    y = (v - intrinsics.cy) / intrinsics.fy
    vx, vy = np.meshgrid(x, y)
    norm = np.sqrt(vx * vx + vy * vy + 1.0)
    return vx / norm, vy / norm, 1.0 / norm


def project(intrinsics, points_cam):
    """Perspective projection of camera-frame points (..., 3) to pixels (..., 2).

    Points must be in front of the camera (z > 0); no bounds clipping.
    """
    p = np.asarray(points_cam, dtype=float)
    if np.any(p[..., 2] <= 0):
        raise PolarimetryError("cannot project points at or behind the camera")
    u = intrinsics.fx * p[..., 0] / p[..., 2] + intrinsics.cx
    v = intrinsics.fy * p[..., 1] / p[..., 2] + intrinsics.cy
    return np.stack([u, v], axis=-1)


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_exp(axis, angle):
    """Rodrigues rotation matrix e^(angle * axis^) for a unit axis."""
    axis = require_unit(axis, "axis")
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class Pose:
    """World-to-camera rotation plus camera center in world coordinates."""

    rotation: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        c = np.asarray(self.center, dtype=float).reshape(3)
        if np.max(np.abs(r.T @ r - np.eye(3))) > ORTHONORMAL_TOL:
            raise PolarimetryError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOL:
            raise PolarimetryError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "center", c)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def world_to_camera(self, points):
        p = np.asarray(points, dtype=float)
        return (p - self.center) @ self.rotation.T

    def camera_to_world(self, points):
        p = np.asarray(points, dtype=float)
        return p @ self.rotation + self.center

    def ray_to_world(self, v_cam):
        """Rotate a camera-frame direction into the world frame."""
        return np.asarray(v_cam, dtype=float) @ self.rotation

    def optical_axis_world(self):
        return self.rotation[2]

    def to_dict(self):
        return {
            "rotation": [float(x) for x in self.rotation.reshape(-1)],
            "center": [float(x) for x in self.center],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["rotation"], dtype=float).reshape(3, 3),
            np.asarray(d["center"], dtype=float),
        )


def transform_normal(pose, normal_world):
    """World-frame unit normal -> camera frame: n_cam = R @ n_world."""
    n = require_unit(normal_world, "normal")
    return pose.rotation @ n


@dataclass(frozen=True)
class PlaneModel:
    """Plane normal . P + offset = 0, with a unit normal; offset in mm."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", require_unit(self.normal, "plane normal"))
        object.__setattr__(self, "offset", float(self.offset))

    def signed_distance(self, points):
        p = np.asarray(points, dtype=float)
        return p @ self.normal + self.offset

    def intersect_rays(self, origin, directions):
        """Ray-plane parameters t for rays origin + t * direction.

        Returns t with +inf where the ray is parallel to the plane.
        """
        d = np.asarray(directions, dtype=float)
        denom = d @ self.normal
        num = -(self.offset + float(np.dot(origin, self.normal)))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(denom) > 1e-15, num / denom, np.inf)
        return t

    def to_dict(self):
        return {"normal": [float(x) for x in self.normal], "offset": self.offset}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["normal"], dtype=float), float(d["offset"]))
