"""Contour generation on phase-angle maps.

Two procedures over the same 2D image trajectory:

* iso-depth tracing (the orthographic-model recipe): step perpendicular
  to the phase angle while holding the camera-frame depth constant;
* perspective propagation: intersect each next pixel ray with the plane
  through the previous point oriented by an estimated normal.

Keeping the pixel track shared isolates the depth-assignment difference
between the models.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    EmptyContour,
    PolarimetryError,
    RayParallelToPlane,
    SeedMasked,
    SeedOutOfBounds,
)
from .geometry import Pose, pixel_rays
from .polarization import sample_phase


@dataclass(frozen=True)
class Contour3D:
    """Ordered 3D contour points (mm, world frame) with their pixel track.

    With bidirectional tracing the seed lies mid-track at ``seed_index``.
    """

    points: np.ndarray
    seed: np.ndarray
    pixel_track: np.ndarray
    seed_index: int = 0

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        t = np.asarray(self.pixel_track, dtype=float).reshape(-1, 2)
        if len(p) != len(t):
            raise PolarimetryError("points and pixel_track must have equal length")
        if not 0 <= self.seed_index < len(p):
            raise PolarimetryError("seed_index outside the track")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "seed", np.asarray(self.seed, dtype=float).reshape(3))
        object.__setattr__(self, "pixel_track", t)

    def __len__(self):
        return len(self.points)


def trace_iso_depth(aolp, seed_pixel, seed_depth, intrinsics, step=0.5,
                    max_steps=4000, pose=None, bidirectional=True):
    """Iso-depth contour: follow the tangent perpendicular to the phase angle.

    From the seed pixel, the track repeatedly samples the phase
    (mod-pi-aware bilinear) and advances ``step`` pixels along
    [sin phi, cos phi], signed for direction continuity; by default both
    signs are traced from the seed and concatenated.  All 3D points share
    the seed's camera-frame depth; ``pose`` (identity when omitted) maps
    them to the world frame.
    """
    u0, v0 = float(seed_pixel[0]), float(seed_pixel[1])
    if not intrinsics.contains((u0, v0)):
        raise SeedOutOfBounds(f"seed pixel ({u0}, {v0}) outside the image")
    if seed_depth <= 0:
        raise PolarimetryError("seed depth must be positive")
    values, ok = sample_phase(aolp, [(u0, v0)])
    if not ok[0]:
        raise SeedMasked(f"seed pixel ({u0}, {v0}) is masked")
    cos2 = np.cos(2.0 * aolp.values)
    sin2 = np.sin(2.0 * aolp.values)
    valid = aolp.mask.astype(np.uint8)
    phi0 = float(values[0])
    tu, tv = np.sin(phi0), np.cos(phi0)
    fwd = kernels.trace_track(cos2, sin2, valid, u0, v0, tu, tv, step, max_steps)
    if bidirectional:
        bwd = kernels.trace_track(cos2, sin2, valid, u0, v0, -tu, -tv, step, max_steps)
        track = np.concatenate([bwd[:0:-1], fwd], axis=0)
        seed_index = len(bwd) - 1
    else:
        track = fwd
        seed_index = 0
    pose = pose or Pose.identity()
    x = (track[:, 0] - intrinsics.cx) / intrinsics.fx
    y = (track[:, 1] - intrinsics.cy) / intrinsics.fy
    points_cam = seed_depth * np.stack([x, y, np.ones_like(x)], axis=-1)
    points = pose.camera_to_world(points_cam)
    seed_cam = seed_depth * np.array([(u0 - intrinsics.cx) / intrinsics.fx,
                                      (v0 - intrinsics.cy) / intrinsics.fy, 1.0])
    return Contour3D(points, pose.camera_to_world(seed_cam), track, seed_index)


def trace_ppa(pixel_track, seed_point, normals, intrinsics, pose=None,
              seed_index=0):
    """Propagate a 3D contour along a fixed pixel track by plane stepping.

    The point at ``seed_index`` is the seed; each neighbor is the
    intersection of its pixel ray with the plane through the previous
    point oriented by the step's normal, applied outward from the seed in
    both directions.  ``normals`` (world frame) is a single 3-vector or
    one normal per track point (the step into point k uses normals[k]).
    The 2D projection of the result is the input track by construction.
    """
    track = np.asarray(pixel_track, dtype=float).reshape(-1, 2)
    if len(track) == 0:
        raise EmptyContour("pixel track is empty")
    if not 0 <= seed_index < len(track):
        raise PolarimetryError("seed_index outside the track")
    pose = pose or Pose.identity()
    seed = np.asarray(seed_point, dtype=float).reshape(3)
    rays = pixel_rays(intrinsics, track) @ pose.rotation  # world-frame directions
    center = pose.center
    nrm = np.asarray(normals, dtype=float)
    steps = [k for k in range(len(track)) if k != seed_index]
    if nrm.ndim == 1:
        denom = rays @ nrm
        if np.any(np.abs(denom[steps]) < 1e-9):
            raise RayParallelToPlane("a track ray is parallel to the plane")
        # constant normal: every step stays on the plane through the seed
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((seed - center) @ nrm) / denom
        points = center + t[:, None] * rays
        points[seed_index] = seed
        return Contour3D(points, seed, track, seed_index)
    if nrm.shape != (len(track), 3):
        raise PolarimetryError(
            "normals must be a 3-vector or one normal per track point")
    points = np.empty((len(track), 3))
    points[seed_index] = seed

    def propagate(k, prev):
        n = nrm[k]
        denom = float(rays[k] @ n)
        if abs(denom) < 1e-9:
            raise RayParallelToPlane(f"track ray {k} is parallel to the step plane")
        t = float((points[prev] - center) @ n) / denom
        points[k] = center + t * rays[k]

    for k in range(seed_index + 1, len(track)):
        propagate(k, k - 1)
    for k in range(seed_index - 1, -1, -1):
        propagate(k, k + 1)
    return Contour3D(points, seed, track, seed_index)


def plane_rmse(contour, plane):
    """Root-mean-square point-to-plane distance of a contour, in mm."""
    if len(contour) == 0:
        raise EmptyContour("contour has no points")
    d = plane.signed_distance(contour.points)
    return float(np.sqrt(np.mean(d * d)))
