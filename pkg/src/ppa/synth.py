"""Synthetic polarization-camera oracle for planar scenes.

Renders four-orientation polarization images plus ground-truth AoLP,
DoLP, depth and normal layers for a rectangular board seen by a
perspective camera, so every estimator in the package can be validated
against exact geometry.  Rendering is deterministic: noise streams are
split per view and per pixel row from the master seed, so parallel and
serial renders agree bit for bit.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .angles import canonical_phase
from .errors import PlaneBehindCamera, PolarimetryError
from .geometry import CameraIntrinsics, PlaneModel, Pose, ray_grid, unit
from .polarization import POLARIZER_ANGLES, PolarizationFrame, ScalarMap

_STREAM_RENDER = 1
_STREAM_POSES = 2

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class Board:
    """Rectangular planar target: center, unit normal, in-plane u axis, size (mm)."""

    center: np.ndarray
    normal: np.ndarray
    u_axis: np.ndarray
    width_mm: float
    height_mm: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        n = unit(np.asarray(self.normal, dtype=float).reshape(3))
        u = np.asarray(self.u_axis, dtype=float).reshape(3)
        u = unit(u - n * float(u @ n))  # project into the plane
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "u_axis", u)
        if not (self.width_mm > 0 and self.height_mm > 0):
            raise PolarimetryError("board size must be positive")

    @property
    def v_axis(self):
        return np.cross(self.normal, self.u_axis)

    @property
    def plane(self):
        return PlaneModel(self.normal, -float(self.normal @ self.center))

    def grid(self, n=11):
        """(n*n, 3) world points covering the board."""
        s = np.linspace(-0.5, 0.5, n)
        uu, vv = np.meshgrid(s * self.width_mm, s * self.height_mm)
        return (self.center
                + uu.reshape(-1, 1) * self.u_axis
                + vv.reshape(-1, 1) * self.v_axis)

    def contains(self, points):
        p = np.asarray(points, dtype=float) - self.center
        du = p @ self.u_axis
        dv = p @ self.v_axis
        return (np.abs(du) <= self.width_mm / 2) & (np.abs(dv) <= self.height_mm / 2)

    def edge_points(self, count, inset=0.02):
        """World points along the u-min edge, slightly inside the board."""
        t = np.linspace(-0.5 + inset, 0.5 - inset, count)
        u_off = (-0.5 + inset) * self.width_mm
        return (self.center
                + u_off * self.u_axis
                + (t * self.height_mm).reshape(-1, 1) * self.v_axis)

    def to_dict(self):
        return {
            "center": [float(x) for x in self.center],
            "normal": [float(x) for x in self.normal],
            "u_axis": [float(x) for x in self.u_axis],
            "width_mm": float(self.width_mm),
            "height_mm": float(self.height_mm),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["center"], dtype=float),
            np.asarray(d["normal"], dtype=float),
            np.asarray(d["u_axis"], dtype=float),
            float(d["width_mm"]),
            float(d["height_mm"]),
        )


@dataclass(frozen=True)
class SceneNoise:
    """Gaussian noise levels: intensity as a fraction of I_avg, AoLP in radians."""

    intensity_sigma: float = 0.0
    aolp_sigma: float = 0.0

    def to_dict(self):
        return {"intensity_sigma": self.intensity_sigma,
                "aolp_sigma": self.aolp_sigma}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["intensity_sigma"]), float(d["aolp_sigma"]))


@dataclass(frozen=True)
class SceneSpec:
    """Complete description of a synthetic capture session."""

    board: Board
    intrinsics: CameraIntrinsics
    poses: tuple
    dolp_mode: str = "specular"  # "specular" (Fresnel) or "constant"
    dolp_constant: float = 0.4
    refractive_index: float = 1.5
    aolp_shift: float = math.pi / 2
    noise: SceneNoise = field(default_factory=SceneNoise)
    seed: int = 0
    base_intensity: float = 0.25
    ambient: float = 0.0

    def __post_init__(self):
        if self.dolp_mode not in ("specular", "constant"):
            raise PolarimetryError("dolp_mode must be 'specular' or 'constant'")
        object.__setattr__(self, "poses", tuple(self.poses))

    def to_dict(self):
        """Scene parameters without the poses (stored per view on disk)."""
        return {
            "board": self.board.to_dict(),
            "intrinsics": self.intrinsics.to_dict(),
            "dolp_mode": self.dolp_mode,
            "dolp_constant": self.dolp_constant,
            "refractive_index": self.refractive_index,
            "aolp_shift": self.aolp_shift,
            "noise": self.noise.to_dict(),
            "seed": self.seed,
            "base_intensity": self.base_intensity,
            "ambient": self.ambient,
            "views": len(self.poses),
        }

    @classmethod
    def from_dict(cls, d, poses):
        return cls(
            board=Board.from_dict(d["board"]),
            intrinsics=CameraIntrinsics.from_dict(d["intrinsics"]),
            poses=tuple(poses),
            dolp_mode=d["dolp_mode"],
            dolp_constant=float(d["dolp_constant"]),
            refractive_index=float(d["refractive_index"]),
            aolp_shift=float(d["aolp_shift"]),
            noise=SceneNoise.from_dict(d["noise"]),
            seed=int(d["seed"]),
            base_intensity=float(d["base_intensity"]),
            ambient=float(d["ambient"]),
        )


@dataclass(frozen=True)
class RenderedView:
    frame: PolarizationFrame
    gt_aolp: ScalarMap
    gt_dolp: ScalarMap
    gt_depth: ScalarMap
    gt_normal_world: np.ndarray
    gt_normal_cam: np.ndarray
    pose: Pose
    view_index: int


def specular_dolp(zenith, refractive_index):
    """Degree of linear polarization of specular reflection vs. incidence angle.

    Standard Fresnel result (Rs - Rp)/(Rs + Rp) in closed form; 0 at
    normal incidence, 1 at the Brewster angle.
    """
    z = np.asarray(zenith, dtype=float)
    if np.any(z < 0) or np.any(z >= np.pi / 2):
        raise PolarimetryError("zenith must lie in [0, pi/2)")
    if not refractive_index > 1:
        raise PolarimetryError("refractive index must exceed 1")
    n2 = refractive_index * refractive_index
    s2 = np.sin(z) ** 2
    num = 2.0 * s2 * np.cos(z) * np.sqrt(n2 - s2)
    den = n2 - s2 - n2 * s2 + 2.0 * s2 * s2
    out = num / den
    return out if out.ndim else float(out)


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def render_view(spec, pose_index):
    """Render one view of the scene: polarization frame plus ground truth.

    Per pixel hitting the board front face: depth from the ray-plane
    intersection, true AoLP = perspective phase + aolp_shift (mod pi),
    DoLP from the scene's mode.  The four intensities follow the
    polarizer sinusoid; configured Gaussian noise perturbs the AoLP
    driving the sinusoid and the intensities themselves (the ground-truth
    layers stay noise-free).  Pixels missing the board, hitting its back
    face, or with the ray parallel to the normal are masked.
    """
    intr = spec.intrinsics
    pose = spec.poses[pose_index]
    board = spec.board
    h, w = intr.height, intr.width

    vx, vy, vz = ray_grid(intr)
    dirs = np.stack([vx, vy, vz], axis=-1).reshape(-1, 3) @ pose.rotation
    plane = board.plane
    t = plane.intersect_rays(pose.center, dirs).reshape(h, w)
    dirs = dirs.reshape(h, w, 3)
    front = (dirs @ plane.normal) < 0
    hit = np.isfinite(t) & (t > 0) & front
    t_safe = np.where(hit, t, 0.0)
    points = pose.center + t_safe[..., None] * dirs
    on_board = hit & board.contains(points.reshape(-1, 3)).reshape(h, w)
    if not np.any(on_board):
        raise PlaneBehindCamera(f"view {pose_index} does not see the board")

    n_world = board.normal
    n_cam = pose.rotation @ n_world

    cross = np.stack([
        vy * n_cam[2] - vz * n_cam[1],
        vz * n_cam[0] - vx * n_cam[2],
        vx * n_cam[1] - vy * n_cam[0],
    ])
    nondegenerate = np.sqrt(np.sum(cross * cross, axis=0)) >= DEGENERACY_TOL
    mask = on_board & nondegenerate

    phase = kernels.ppa_phase_map(n_cam, vx, vy, vz)
    gt_aolp = canonical_phase(phase + spec.aolp_shift)
    gt_aolp = np.where(mask, gt_aolp, 0.0)

    cos_view = np.clip(-(vx * n_cam[0] + vy * n_cam[1] + vz * n_cam[2]), 0.0, 1.0)
    if spec.dolp_mode == "constant":
        rho = np.where(mask, spec.dolp_constant, 0.0)
    else:
        zenith = np.arccos(np.clip(cos_view, 1e-12, 1.0))
        zenith = np.minimum(zenith, np.pi / 2 - 1e-9)
        rho = np.where(mask, specular_dolp(zenith, spec.refractive_index), 0.0)
    rho = np.clip(rho, 0.0, 1.0)

    depth = np.where(mask, t_safe * vz, 0.0)

    base = spec.base_intensity
    background = 0.5 * base + spec.ambient
    iavg_total = np.where(on_board, base + spec.ambient, background)
    # polarized fraction measured by the sensor: ambient light dilutes DoLP
    rho_measured = np.where(mask, rho * base / (base + spec.ambient), 0.0)

    phase_render = gt_aolp.copy()
    noise = spec.noise
    if noise.aolp_sigma > 0:
        for j in range(h):
            eps = _rng(spec.seed, _STREAM_RENDER, pose_index, j).normal(
                0.0, noise.aolp_sigma, w)
            phase_render[j] += eps

    channels = []
    for alpha in POLARIZER_ANGLES:
        ch = np.where(
            on_board,
            base * (1.0 + rho * np.cos(2.0 * (alpha - phase_render))) + spec.ambient,
            background,
        )
        channels.append(ch)

    if noise.intensity_sigma > 0:
        for j in range(h):
            eps = _rng(spec.seed, _STREAM_RENDER, pose_index, h + j).normal(
                0.0, 1.0, (4, w))
            for c in range(4):
                channels[c][j] += eps[c] * noise.intensity_sigma * iavg_total[j]
    channels = [np.clip(ch, 0.0, None) for ch in channels]

    frame = PolarizationFrame(*channels, intrinsics=intr)
    return RenderedView(
        frame=frame,
        gt_aolp=ScalarMap(gt_aolp, mask),
        gt_dolp=ScalarMap(rho_measured, mask),
        gt_depth=ScalarMap(depth, mask),
        gt_normal_world=n_world.copy(),
        gt_normal_cam=n_cam,
        pose=pose,
        view_index=pose_index,
    )


def make_orbit_pose(board, distance, polar, azimuth, roll=0.0, target=None):
    """Camera pose on a sphere around the board, looking at ``target``.

    ``polar`` is the angle from the board normal (0 = fronto-parallel),
    ``azimuth`` the in-plane direction of the offset, ``roll`` the
    rotation about the optical axis.
    """
    n, u, v = board.normal, board.u_axis, board.v_axis
    direction = (math.sin(polar) * (math.cos(azimuth) * u + math.sin(azimuth) * v)
                 + math.cos(polar) * n)
    center = board.center + distance * direction
    look = board.center if target is None else np.asarray(target, dtype=float)
    z_cam = unit(look - center)
    up = v if np.linalg.norm(np.cross(z_cam, v)) > 1e-9 else u
    x_cam = unit(np.cross(z_cam, up))
    y_cam = np.cross(z_cam, x_cam)
    if roll != 0.0:
        cr, sr = math.cos(roll), math.sin(roll)
        x_cam, y_cam = cr * x_cam + sr * y_cam, -sr * x_cam + cr * y_cam
    return Pose(np.stack([x_cam, y_cam, z_cam]), center)


def visible_fraction(pose, intrinsics, points_world):
    """Fraction of world points projecting inside the image, in front."""
    p = pose.world_to_camera(points_world)
    ok = p[:, 2] > 0
    if not np.any(ok):
        return 0.0
    u = intrinsics.fx * p[ok, 0] / p[ok, 2] + intrinsics.cx
    v = intrinsics.fy * p[ok, 1] / p[ok, 2] + intrinsics.cy
    inside = ((u >= -0.5) & (u <= intrinsics.width - 0.5)
              & (v >= -0.5) & (v <= intrinsics.height - 0.5))
    return float(np.count_nonzero(inside)) / len(points_world)


def sample_poses(n, distance_range, polar_range, seed, board, intrinsics,
                 azimuth_range=(0.0, 2.0 * math.pi), roll_range=(-math.pi, math.pi),
                 min_visible=0.5, look_jitter=0.3):
    """Deterministic random poses over the board front side.

    Camera centers lie in the spherical cap given by ``polar_range`` at
    distances from ``distance_range``; the optical axis points at a
    random spot on the board (exactly at its center when the polar range
    is degenerate zero, giving a clean fronto pose).  Poses that see less
    than ``min_visible`` of the board are rejected and redrawn.
    """
    if n < 1:
        raise PolarimetryError("need at least one pose")
    if not (0 <= polar_range[0] <= polar_range[1] < math.pi / 2):
        raise PolarimetryError("polar range must lie in [0, pi/2)")
    if not (0 < distance_range[0] <= distance_range[1]):
        raise PolarimetryError("distance range must be positive")
    rng = _rng(seed, _STREAM_POSES)
    grid = board.grid(11)
    fronto_only = polar_range[1] == 0.0
    poses = []
    attempts = 0
    while len(poses) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise PolarimetryError(
                "pose sampling failed: ranges appear infeasible for the board/camera")
        dist = rng.uniform(distance_range[0], distance_range[1])
        polar = rng.uniform(polar_range[0], polar_range[1])
        azimuth = rng.uniform(azimuth_range[0], azimuth_range[1])
        if fronto_only:
            roll = 0.0
            target = None
        else:
            roll = rng.uniform(roll_range[0], roll_range[1])
            ju, jv = rng.uniform(-look_jitter, look_jitter, 2)
            target = (board.center
                      + ju * board.width_mm / 2 * board.u_axis
                      + jv * board.height_mm / 2 * board.v_axis)
        pose = make_orbit_pose(board, dist, polar, azimuth, roll, target)
        if visible_fraction(pose, intrinsics, grid) >= min_visible:
            poses.append(pose)
    return poses


def default_board(width_mm=400.0, height_mm=300.0):
    """The reference target: a board in the world z=0 plane, normal +z."""
    return Board(
        center=np.zeros(3),
        normal=np.array([0.0, 0.0, 1.0]),
        u_axis=np.array([1.0, 0.0, 0.0]),
        width_mm=width_mm,
        height_mm=height_mm,
    )
