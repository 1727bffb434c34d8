"""Synthetic-scene oracle tests.

The Fresnel DoLP oracle below computes (Rs - Rp)/(Rs + Rp) from the raw
Fresnel reflectances, independently of the closed-form expression used
by the renderer.
"""

import numpy as np
import pytest

from ppa.angles import phase_distance
from ppa.errors import PlaneBehindCamera, PolarimetryError
from ppa.geometry import CameraIntrinsics, project
from ppa.models import ppa_phase
from ppa.polarization import compute_stokes, extract_state
from ppa.synth import (
    Board,
    SceneNoise,
    SceneSpec,
    default_board,
    make_orbit_pose,
    render_view,
    sample_poses,
    specular_dolp,
    visible_fraction,
)


def fresnel_dolp_oracle(theta_i, n):
    """Specular DoLP from the s/p Fresnel reflectances."""
    theta_t = np.arcsin(np.sin(theta_i) / n)
    rs = (np.cos(theta_i) - n * np.cos(theta_t)) / (
        np.cos(theta_i) + n * np.cos(theta_t))
    rp = (n * np.cos(theta_i) - np.cos(theta_t)) / (
        n * np.cos(theta_i) + np.cos(theta_t))
    Rs, Rp = rs * rs, rp * rp
    return (Rs - Rp) / (Rs + Rp)


class TestSpecularDolp:
    def test_zero_at_normal_incidence(self):
        assert specular_dolp(0.0, 1.5) == 0.0

    def test_one_at_brewster(self):
        brewster = np.arctan(1.5)
        assert np.degrees(brewster) == pytest.approx(56.3, abs=0.1)
        assert specular_dolp(brewster, 1.5) == pytest.approx(1.0, abs=1e-12)

    def test_matches_fresnel_oracle(self):
        for deg in (5, 15, 30, 45, 60, 75, 85):
            t = np.radians(deg)
            assert specular_dolp(t, 1.5) == pytest.approx(
                fresnel_dolp_oracle(t, 1.5), abs=1e-12)
        assert 0.0 < specular_dolp(np.radians(30), 1.5) < 1.0

    def test_domain_checks(self):
        with pytest.raises(PolarimetryError):
            specular_dolp(np.pi / 2, 1.5)
        with pytest.raises(PolarimetryError):
            specular_dolp(0.3, 1.0)

    def test_vectorized(self):
        z = np.linspace(0, np.pi / 2 - 1e-3, 100)
        out = specular_dolp(z, 1.5)
        assert out.shape == z.shape
        assert np.all((out >= 0) & (out <= 1.0 + 1e-12))


def tiny_scene(polar_deg=35.0, azimuth_deg=0.0, distance=500.0, noise=None,
               dolp_mode="constant", shift=0.0, size=(96, 72), fov=86.6,
               n_extra_poses=0, seed=3):
    board = default_board()
    cam = CameraIntrinsics.from_fov(size[0], size[1], fov)
    poses = [make_orbit_pose(board, distance, np.radians(polar_deg),
                             np.radians(azimuth_deg))]
    for k in range(n_extra_poses):
        poses.append(make_orbit_pose(board, distance, np.radians(polar_deg),
                                     np.radians(azimuth_deg + 70 * (k + 1))))
    return SceneSpec(
        board=board, intrinsics=cam, poses=poses, dolp_mode=dolp_mode,
        dolp_constant=0.4, refractive_index=1.5, aolp_shift=shift,
        noise=noise or SceneNoise(), seed=seed)


class TestRenderView:
    def test_fronto_axis_pixel_masked(self):
        # camera straight above the board center: the principal-point ray
        # is parallel to the normal, so the PoI is undefined there
        board = default_board()
        cam = CameraIntrinsics.from_fov(101, 101, 60.0)
        spec = SceneSpec(board=board, intrinsics=cam,
                         poses=[make_orbit_pose(board, 500.0, 0.0, 0.0)],
                         dolp_mode="constant", aolp_shift=0.0)
        view = render_view(spec, 0)
        cy, cx = int(round(cam.cy)), int(round(cam.cx))
        assert not view.gt_aolp.mask[cy, cx]
        assert view.gt_aolp.mask.sum() > 1000  # rest of the board is fine

    def test_gt_phase_matches_scalar_model(self):
        spec = tiny_scene()
        view = render_view(spec, 0)
        ys, xs = np.nonzero(view.gt_aolp.mask)
        cam = spec.intrinsics
        for i in range(0, len(ys), max(1, len(ys) // 7)):
            u, v = float(xs[i]), float(ys[i])
            ray = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
            ray /= np.linalg.norm(ray)
            expect = ppa_phase(view.gt_normal_cam, ray)
            assert phase_distance(view.gt_aolp.values[int(v), int(u)],
                                  expect) < 1e-12

    def test_depth_is_ray_plane_distance(self):
        spec = tiny_scene()
        view = render_view(spec, 0)
        ys, xs = np.nonzero(view.gt_depth.mask)
        cam = spec.intrinsics
        i = len(ys) // 2
        u, v = float(xs[i]), float(ys[i])
        z = view.gt_depth.values[int(v), int(u)]
        p_cam = z * np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
        p_world = view.pose.camera_to_world(p_cam)
        assert abs(spec.board.plane.signed_distance(p_world)) < 1e-9

    def test_depth_reprojection_identity(self):
        spec = tiny_scene()
        view = render_view(spec, 0)
        ys, xs = np.nonzero(view.gt_depth.mask)
        cam = spec.intrinsics
        u, v = xs.astype(float), ys.astype(float)
        z = view.gt_depth.values[ys, xs]
        pts = np.stack([z * (u - cam.cx) / cam.fx,
                        z * (v - cam.cy) / cam.fy, z], axis=-1)
        px = project(cam, pts)
        np.testing.assert_allclose(px[:, 0], u, atol=1e-9)
        np.testing.assert_allclose(px[:, 1], v, atol=1e-9)

    def test_extraction_roundtrip_noiseless(self):
        # render -> stokes -> extract reproduces the ground-truth state
        spec = tiny_scene(dolp_mode="specular", shift=np.pi / 2)
        view = render_view(spec, 0)
        aolp, dolp, _ = extract_state(compute_stokes(view.frame), 0.1)
        both = view.gt_aolp.mask & aolp.mask
        assert both.sum() > 500
        d = phase_distance(aolp.values[both], view.gt_aolp.values[both])
        assert np.max(d) < 1e-9
        np.testing.assert_allclose(dolp.values[both],
                                   view.gt_dolp.values[both], atol=1e-9)

    def test_ambient_floor_pushes_dolp_below_threshold(self):
        spec = tiny_scene(dolp_mode="constant")
        lit = SceneSpec(
            board=spec.board, intrinsics=spec.intrinsics, poses=spec.poses,
            dolp_mode="constant", dolp_constant=0.4, aolp_shift=0.0,
            noise=SceneNoise(), seed=3, base_intensity=0.25, ambient=2.0)
        view = render_view(lit, 0)
        # measured DoLP = 0.4 * 0.25 / 2.25 < 0.05
        aolp, _, _ = extract_state(compute_stokes(view.frame), 0.1)
        assert not np.any(aolp.mask & view.gt_aolp.mask)

    def test_render_deterministic_with_noise(self):
        spec = tiny_scene(noise=SceneNoise(0.01, np.radians(2)))
        a = render_view(spec, 0)
        b = render_view(spec, 0)
        for x, y in zip(a.frame.channels(), b.frame.channels()):
            np.testing.assert_array_equal(x, y)
        np.testing.assert_array_equal(a.gt_aolp.values, b.gt_aolp.values)

    def test_gt_layers_noise_free(self):
        clean = render_view(tiny_scene(), 0)
        noisy = render_view(tiny_scene(noise=SceneNoise(0.02, 0.05)), 0)
        np.testing.assert_array_equal(clean.gt_aolp.values, noisy.gt_aolp.values)
        assert not np.array_equal(clean.frame.i0, noisy.frame.i0)

    def test_mask_consistent_across_layers(self):
        view = render_view(tiny_scene(), 0)
        np.testing.assert_array_equal(view.gt_aolp.mask, view.gt_dolp.mask)
        np.testing.assert_array_equal(view.gt_aolp.mask, view.gt_depth.mask)

    def test_plane_behind_camera(self):
        board = default_board()
        cam = CameraIntrinsics.from_fov(64, 48, 60.0)
        up = make_orbit_pose(board, 500.0, 0.0, 0.0)
        away = type(up)(up.rotation @ np.diag([1.0, -1.0, -1.0]), up.center)
        spec = SceneSpec(board=board, intrinsics=cam, poses=[away],
                         dolp_mode="constant", aolp_shift=0.0)
        with pytest.raises(PlaneBehindCamera):
            render_view(spec, 0)


class TestSamplePoses:
    BOARD = default_board()
    CAM = CameraIntrinsics.from_fov(160, 120, 86.6)

    def test_deterministic(self):
        a = sample_poses(5, (400, 700), (0.2, 0.8), 11, self.BOARD, self.CAM)
        b = sample_poses(5, (400, 700), (0.2, 0.8), 11, self.BOARD, self.CAM)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.rotation, pb.rotation)
            np.testing.assert_array_equal(pa.center, pb.center)

    def test_fronto_pose_at_zero_polar(self):
        (pose,) = sample_poses(1, (500, 500), (0.0, 0.0), 1, self.BOARD, self.CAM)
        np.testing.assert_allclose(pose.center, [0, 0, 500], atol=1e-9)
        np.testing.assert_allclose(pose.optical_axis_world(), [0, 0, -1],
                                   atol=1e-12)

    def test_visibility_enforced(self):
        poses = sample_poses(30, (400, 700), (0.1, 0.85), 5, self.BOARD,
                             self.CAM)
        assert len(poses) == 30
        grid = self.BOARD.grid(11)
        for p in poses:
            assert visible_fraction(p, self.CAM, grid) >= 0.5
            # front side: board normal faces the camera
            assert (p.rotation @ self.BOARD.normal)[2] < 0

    def test_many_poses(self):
        poses = sample_poses(282, (400, 700), (0.2, 0.8), 7, self.BOARD,
                             self.CAM)
        assert len(poses) == 282

    def test_infeasible_range_raises(self):
        tiny = CameraIntrinsics.from_fov(16, 12, 5.0)  # sees almost nothing
        with pytest.raises(PolarimetryError):
            sample_poses(1, (50.0, 50.0), (0.1, 0.85), 1, self.BOARD, tiny)


class TestBoard:
    def test_axes_orthonormal(self):
        b = Board(np.array([1.0, 2, 3]), np.array([0.0, 1.0, 1.0]),
                  np.array([1.0, 0.2, 0]), 100, 50)
        assert abs(b.normal @ b.u_axis) < 1e-12
        assert np.linalg.norm(b.v_axis) == pytest.approx(1.0)

    def test_contains(self):
        b = default_board(400, 300)
        assert b.contains(np.array([[0, 0, 0], [199, 0, 0], [201, 0, 0],
                                    [0, 151, 0]])).tolist() == [
            True, True, False, False]

    def test_edge_points_on_plane(self):
        b = default_board()
        pts = b.edge_points(20)
        assert pts.shape == (20, 3)
        np.testing.assert_allclose(b.plane.signed_distance(pts), 0, atol=1e-9)
        assert np.all(b.contains(pts))

    def test_dict_roundtrip(self):
        b = default_board()
        again = Board.from_dict(b.to_dict())
        np.testing.assert_array_equal(again.center, b.center)
        assert again.width_mm == b.width_mm
