"""On-disk dataset layout (synthetic or ingested real captures).

    <root>/scene.json
    <root>/view_000/{i0,i45,i90,i135}.png   16-bit intensities
    <root>/view_000/pose.json               {"rotation": 9 floats, "center": 3}
    <root>/view_000/{gt_aolp,gt_dolp,gt_depth}.pfm
    <root>/view_000/mask.png                8-bit 0/255

scene.json carries the scene parameters, the PNG intensity scale and a
config hash; poses live per view.  Real captures use the same layout
with externally produced pose.json files.
"""

import os
from pathlib import Path

import numpy as np

from . import image_io, reports, runtime
from .errors import PolarimetryError
from .geometry import Pose
from .polarization import PolarizationFrame, ScalarMap, decode_mosaic
from .synth import SceneSpec, render_view

SCENE_FILE = "scene.json"


def view_dir(root, k):
    return Path(root) / f"view_{k:03d}"


def png_scale_for(spec):
    """Digitization scale: intensity units -> 16-bit counts, with noise headroom."""
    peak = 2.0 * spec.base_intensity + spec.ambient
    peak *= 1.0 + 6.0 * spec.noise.intensity_sigma
    return 65535.0 / peak


def write_dataset(spec, root, write_images=True, write_maps=True):
    """Render every view of a scene into the directory layout above.

    Deterministic for a fixed spec: rerunning produces byte-identical
    files.  Returns the scene manifest dict.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    scale = png_scale_for(spec)
    manifest = {
        "schema_version": reports.SCHEMA_VERSION,
        "kind": "scene",
        "png_scale": scale,
        "write_images": bool(write_images),
        "write_maps": bool(write_maps),
    }
    manifest.update(spec.to_dict())
    manifest["config_hash"] = reports.config_hash(manifest)
    reports.dump_json(root / SCENE_FILE, manifest)

    def _render_and_write(k):
        d = view_dir(root, k)
        d.mkdir(exist_ok=True)
        reports.dump_json(d / "pose.json", spec.poses[k].to_dict())
        if not (write_images or write_maps):
            return k
        view = render_view(spec, k)
        if write_images:
            for name, img in zip(("i0", "i45", "i90", "i135"),
                                 view.frame.channels()):
                counts = np.clip(np.round(img * scale), 0, 65535).astype(np.uint16)
                image_io.write_png16(d / f"{name}.png", counts)
        if write_maps:
            image_io.write_pfm(d / "gt_aolp.pfm", view.gt_aolp.values)
            image_io.write_pfm(d / "gt_dolp.pfm", view.gt_dolp.values)
            image_io.write_pfm(d / "gt_depth.pfm", view.gt_depth.values)
            image_io.write_mask(d / "mask.png", view.gt_aolp.mask)
        return k

    runtime.thread_map(_render_and_write, range(len(spec.poses)))
    return manifest


def load_manifest(root):
    path = Path(root) / SCENE_FILE
    if not path.exists():
        raise PolarimetryError(f"no {SCENE_FILE} in {root}")
    return reports.load_json(path)


def load_pose(root, k):
    return Pose.from_dict(reports.load_json(view_dir(root, k) / "pose.json"))


def load_poses(root, n_views):
    return [load_pose(root, k) for k in range(n_views)]


def load_scene(root):
    """SceneSpec reassembled from scene.json plus the per-view pose files."""
    manifest = load_manifest(root)
    poses = load_poses(root, int(manifest["views"]))
    return SceneSpec.from_dict(manifest, poses)


def load_view_maps(root, k):
    """Ground-truth ScalarMaps of one view: aolp, dolp, depth."""
    d = view_dir(root, k)
    mask = image_io.read_mask(d / "mask.png")
    return {
        "aolp": ScalarMap(image_io.read_pfm(d / "gt_aolp.pfm"), mask),
        "dolp": ScalarMap(image_io.read_pfm(d / "gt_dolp.pfm"), mask),
        "depth": ScalarMap(image_io.read_pfm(d / "gt_depth.pfm"), mask),
    }


def load_view_frame(root, k, intrinsics, png_scale, pattern=None):
    """Intensity frame of one view, converted back to float units.

    Views captured by a DoFP sensor may store a single raw mosaic
    (``mosaic.png``) instead of the four channel images; the 2x2
    orientation ``pattern`` from the dataset config decodes it (the
    returned frame then carries the halved intrinsics).
    """
    d = view_dir(root, k)
    if not (d / "i0.png").exists() and (d / "mosaic.png").exists():
        if pattern is None:
            raise PolarimetryError(
                f"{d} holds a raw mosaic but the dataset config has no pattern")
        raw = image_io.read_png(d / "mosaic.png").astype(np.float64) / png_scale
        return decode_mosaic(raw, pattern, intrinsics)
    channels = []
    for name in ("i0", "i45", "i90", "i135"):
        path = d / f"{name}.png"
        if not path.exists():
            raise PolarimetryError(f"missing intensity image {path}")
        channels.append(image_io.read_png(path).astype(np.float64) / png_scale)
    return PolarizationFrame(*channels, intrinsics=intrinsics)


def dataset_file_bytes(root):
    """Map of relative path -> file bytes, for determinism comparisons."""
    root = Path(root)
    out = {}
    for dirpath, _dirnames, filenames in sorted(os.walk(root)):
        for name in sorted(filenames):
            p = Path(dirpath) / name
            out[str(p.relative_to(root))] = p.read_bytes()
    return out
