import numpy as np

from ppa import dataset as ds
from ppa.angles import phase_distance
from ppa.geometry import CameraIntrinsics
from ppa.synth import (
    SceneNoise,
    SceneSpec,
    default_board,
    render_view,
    sample_poses,
)


def small_spec(views=2, noise=None, seed=5):
    board = default_board()
    cam = CameraIntrinsics.from_fov(64, 48, 86.6)
    poses = sample_poses(views, (450, 600), (0.3, 0.7), seed, board, cam)
    return SceneSpec(board=board, intrinsics=cam, poses=poses,
                     dolp_mode="specular", aolp_shift=np.pi / 2,
                     noise=noise or SceneNoise(), seed=seed)


def test_layout_and_roundtrip(tmp_path):
    spec = small_spec()
    manifest = ds.write_dataset(spec, tmp_path / "d")
    root = tmp_path / "d"
    assert (root / "scene.json").exists()
    for k in range(2):
        d = root / f"view_{k:03d}"
        for name in ("i0.png", "i45.png", "i90.png", "i135.png", "pose.json",
                     "gt_aolp.pfm", "gt_dolp.pfm", "gt_depth.pfm", "mask.png"):
            assert (d / name).exists(), name
    assert manifest["views"] == 2
    assert manifest["config_hash"]

    again = ds.load_scene(root)
    assert again.intrinsics == spec.intrinsics
    assert again.aolp_shift == spec.aolp_shift
    np.testing.assert_array_equal(again.board.center, spec.board.center)
    for pa, pb in zip(again.poses, spec.poses):
        np.testing.assert_allclose(pa.rotation, pb.rotation, atol=1e-15)
        np.testing.assert_allclose(pa.center, pb.center, atol=1e-12)


def test_maps_roundtrip_float32(tmp_path):
    spec = small_spec()
    ds.write_dataset(spec, tmp_path / "d")
    view = render_view(spec, 0)
    maps = ds.load_view_maps(tmp_path / "d", 0)
    np.testing.assert_array_equal(maps["aolp"].mask, view.gt_aolp.mask)
    # float32 storage: ~1e-7 relative
    np.testing.assert_allclose(maps["depth"].values, view.gt_depth.values,
                               rtol=1e-6, atol=1e-4)
    m = view.gt_aolp.mask
    assert np.max(phase_distance(maps["aolp"].values[m],
                                 view.gt_aolp.values[m])) < 1e-6


def test_frame_roundtrip_quantized(tmp_path):
    spec = small_spec()
    manifest = ds.write_dataset(spec, tmp_path / "d")
    view = render_view(spec, 0)
    frame = ds.load_view_frame(tmp_path / "d", 0, spec.intrinsics,
                               manifest["png_scale"])
    # 16-bit quantization error, in intensity units
    q = 0.5 / manifest["png_scale"]
    np.testing.assert_allclose(frame.i0, view.frame.i0, atol=1.01 * q)


def test_write_is_deterministic(tmp_path):
    spec = small_spec(noise=SceneNoise(0.01, np.radians(1)))
    ds.write_dataset(spec, tmp_path / "a")
    ds.write_dataset(spec, tmp_path / "b")
    fa = ds.dataset_file_bytes(tmp_path / "a")
    fb = ds.dataset_file_bytes(tmp_path / "b")
    assert fa.keys() == fb.keys()
    for name in fa:
        assert fa[name] == fb[name], f"{name} differs"


def test_mosaic_ingestion(tmp_path):
    # a DoFP view stores one raw mosaic; the config pattern decodes it
    import json

    from ppa.polarization import compute_stokes, extract_state
    from ppa import image_io

    spec = small_spec(views=1)
    manifest = ds.write_dataset(spec, tmp_path / "d")
    d = ds.view_dir(tmp_path / "d", 0)
    view = render_view(spec, 0)
    pattern = [["0", "45"], ["135", "90"]]
    h, w = view.frame.i0.shape
    mosaic = np.zeros((2 * h, 2 * w))
    mosaic[0::2, 0::2] = view.frame.i0
    mosaic[0::2, 1::2] = view.frame.i45
    mosaic[1::2, 0::2] = view.frame.i135
    mosaic[1::2, 1::2] = view.frame.i90
    counts = np.clip(np.round(mosaic * manifest["png_scale"]), 0,
                     65535).astype(np.uint16)
    for name in ("i0", "i45", "i90", "i135"):
        (d / f"{name}.png").unlink()
    image_io.write_png16(d / "mosaic.png", counts)

    full = CameraIntrinsics(2 * spec.intrinsics.fx, 2 * spec.intrinsics.fy,
                            2 * spec.intrinsics.cx, 2 * spec.intrinsics.cy,
                            2 * spec.intrinsics.width,
                            2 * spec.intrinsics.height)
    frame = ds.load_view_frame(tmp_path / "d", 0, full, manifest["png_scale"],
                               pattern=pattern)
    assert frame.intrinsics.width == spec.intrinsics.width
    q = 0.5 / manifest["png_scale"]
    np.testing.assert_allclose(frame.i0, view.frame.i0, atol=1.01 * q)
    np.testing.assert_allclose(frame.i90, view.frame.i90, atol=1.01 * q)
    aolp, _, _ = extract_state(compute_stokes(frame), 0.1)
    both = aolp.mask & view.gt_aolp.mask
    assert both.sum() > 100
    assert np.max(phase_distance(aolp.values[both],
                                 view.gt_aolp.values[both])) < 1e-3


def test_worker_cap_does_not_change_bytes(tmp_path, monkeypatch):
    spec = small_spec(noise=SceneNoise(0.01, 0.01))
    monkeypatch.setenv("PPA_NUM_THREADS", "1")
    ds.write_dataset(spec, tmp_path / "serial")
    monkeypatch.setenv("PPA_NUM_THREADS", "4")
    ds.write_dataset(spec, tmp_path / "pooled")
    fa = ds.dataset_file_bytes(tmp_path / "serial")
    fb = ds.dataset_file_bytes(tmp_path / "pooled")
    assert fa.keys() == fb.keys()
    for name in fa:
        assert fa[name] == fb[name]
