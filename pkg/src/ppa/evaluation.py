"""Experiment suite: dataset synthesis, model accuracy, normal estimation,
contour comparison, and report merging.

Each command consumes a dataset directory (scene.json + per-view files),
writes a schema-validated JSON report plus CSV tables, and is
byte-deterministic for a fixed seed.  Synthetic scenes can be evaluated
straight from their geometry (``source="model"``/``"render"``), from the
stored ground-truth maps (``"maps"``) or by re-extracting the
polarization state from the intensity images (``"images"``); ingested
real captures use the latter.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import image_io, kernels, reports, runtime
from .angles import canonical_phase, signed_phase_error, wrap_angle
from .contours import trace_iso_depth, trace_ppa
from .errors import IllConditioned, PolarimetryError
from .estimation import (
    ConstraintSystem,
    build_multi_view_system,
    solve_normal,
    solve_normals_batched,
)
from .geometry import CameraIntrinsics, project, ray_grid, unit
from .models import ModelKind, opa_phase, ppa_phase
from .polarization import (
    ScalarMap,
    compute_stokes,
    extract_state,
    gaussian_blur,
    sample_phase,
)
from .synth import (
    SceneNoise,
    SceneSpec,
    default_board,
    render_view,
    sample_poses,
)

_STREAM_EST_SINGLE = 11
_STREAM_EST_MULTI = 12
_STREAM_CONTOURS = 13
_STREAM_CONTOUR_OBS = 14


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def angular_error_deg(a, b):
    """Angle between unit vectors (broadcast over leading axes), degrees."""
    d = np.clip(np.sum(np.asarray(a) * np.asarray(b), axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(d))


# ---------------------------------------------------------------------------
# synth


@dataclass
class SynthConfig:
    out: str
    views: int = 282
    width: int = 640
    height: int = 480
    fov_deg: float = 86.6
    distance_mm: tuple = (400.0, 700.0)
    polar_deg: tuple = (10.0, 50.0)
    board_mm: tuple = (400.0, 300.0)
    dolp_mode: str = "specular"
    dolp_constant: float = 0.4
    refractive_index: float = 1.5
    aolp_shift: float = None  # None -> pi/2 for specular, 0 for constant
    noise_intensity: float = 0.0
    noise_aolp_deg: float = 0.0
    seed: int = 7
    write_images: bool = True
    write_maps: bool = True


def build_scene(cfg):
    """SceneSpec for a synthetic capture session per the synth options."""
    board = default_board(cfg.board_mm[0], cfg.board_mm[1])
    intrinsics = CameraIntrinsics.from_fov(cfg.width, cfg.height, cfg.fov_deg)
    poses = sample_poses(
        cfg.views,
        cfg.distance_mm,
        tuple(np.deg2rad(cfg.polar_deg)),
        cfg.seed,
        board,
        intrinsics,
    )
    shift = cfg.aolp_shift
    if shift is None:
        shift = math.pi / 2 if cfg.dolp_mode == "specular" else 0.0
    return SceneSpec(
        board=board,
        intrinsics=intrinsics,
        poses=poses,
        dolp_mode=cfg.dolp_mode,
        dolp_constant=cfg.dolp_constant,
        refractive_index=cfg.refractive_index,
        aolp_shift=shift,
        noise=SceneNoise(cfg.noise_intensity, np.deg2rad(cfg.noise_aolp_deg)),
        seed=cfg.seed,
    )


def run_synth(cfg):
    spec = build_scene(cfg)
    manifest = ds.write_dataset(spec, cfg.out, cfg.write_images, cfg.write_maps)
    return manifest


# ---------------------------------------------------------------------------
# shared evaluation plumbing


@dataclass
class EvalConfig:
    dataset: str
    out: str
    model: str = "both"  # opa | ppa | both
    dolp_threshold: float = 0.1
    blur_sigma: float = 1.0
    views: int = 3
    trials: int = 1000
    seed: int = 0
    noise_aolp_deg: float = 0.0
    source: str = "auto"  # auto | model | render | maps | images
    mode: str = "multi"  # single | multi
    pixels: int = 100000
    sweep: str = ""  # e.g. "2:20"
    step: float = 0.5
    max_steps: int = 4000
    num_seeds: int = 20
    view_pair: tuple = (0, 1)
    dump_maps: bool = False  # write per-view predicted phase maps (PFM)

    def __post_init__(self):
        if not 0.0 <= self.dolp_threshold < 1.0:
            raise PolarimetryError("dolp threshold must lie in [0, 1)")
        if self.views < 1 or self.trials < 1:
            raise PolarimetryError("views and trials must be at least 1")
        if self.blur_sigma < 0 or self.noise_aolp_deg < 0:
            raise PolarimetryError("blur sigma and noise must be non-negative")

    def models(self):
        if self.model == "both":
            return [ModelKind.OPA, ModelKind.PPA]
        return [ModelKind(self.model)]

    def sweep_views(self):
        if not self.sweep:
            return [self.views]
        lo, hi = (int(x) for x in self.sweep.split(":"))
        return list(range(lo, hi + 1))


def _resolve_source(cfg, default="model"):
    return default if cfg.source == "auto" else cfg.source


def _provenance(cfg, manifest):
    return {
        "source": manifest.get("source", "synthetic"),
        "seed": cfg.seed,
        # basename only: reports must be byte-identical across working dirs
        "dataset": Path(cfg.dataset).name,
        "config_hash": manifest.get("config_hash"),
        "notes": [
            "poses are synthetic (configurable sampling replaces the "
            "reference view-selection step)",
        ],
    }


def _finish_report(cfg, payload, out_path):
    reports.validate_report(payload)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    reports.dump_json(out_path, payload)
    return payload


def _geometric_phase_maps(spec, view_index, noise_sigma_rad, seed_key):
    """Unshifted (geometric) phase map of one view, optionally with noise."""
    view = render_view(spec, view_index)
    values = canonical_phase(view.gt_aolp.values - spec.aolp_shift)
    if noise_sigma_rad > 0:
        rng = _rng(spec.seed, *seed_key, view_index)
        values = canonical_phase(
            values + rng.normal(0.0, noise_sigma_rad, values.shape))
    return ScalarMap(np.where(view.gt_aolp.mask, values, 0.0),
                     view.gt_aolp.mask), view


# ---------------------------------------------------------------------------
# model accuracy


def _accuracy_one_view(spec, root, manifest, cfg, k, want_opa, want_ppa, source):
    intr = spec.intrinsics
    if source in ("model", "render"):
        view = render_view(spec, k)
        frame = view.frame
        gt_mask = view.gt_aolp.mask
        pose = view.pose
    else:
        pose = ds.load_pose(root, k)
        gt_mask = ds.load_view_maps(root, k)["aolp"].mask
        frame = ds.load_view_frame(root, k, intr, manifest["png_scale"])
    if cfg.blur_sigma > 0:
        frame = gaussian_blur(frame, cfg.blur_sigma)
    aolp, _dolp, _iavg = extract_state(compute_stokes(frame), cfg.dolp_threshold)
    use = aolp.mask & gt_mask
    if not np.any(use):
        return None

    vx, vy, vz = ray_grid(intr)
    n_cam = pose.rotation @ spec.board.normal
    measured = canonical_phase(aolp.values - spec.aolp_shift)

    cos_view = np.clip(-(vx * n_cam[0] + vy * n_cam[1] + vz * n_cam[2]), -1.0, 1.0)
    viewing_deg = np.degrees(np.arccos(cos_view[use]))
    az_diff_deg = np.degrees(wrap_angle(
        np.arctan2(vy, vx) - math.atan2(n_cam[1], n_cam[0])))[use]
    zenith_deg = float(np.degrees(np.arccos(np.clip(-n_cam[2], -1.0, 1.0))))

    uu, vv = np.meshgrid(np.arange(intr.width, dtype=float),
                         np.arange(intr.height, dtype=float))
    rmax = math.hypot(max(intr.cx, intr.width - 1 - intr.cx),
                      max(intr.cy, intr.height - 1 - intr.cy))
    radial = (np.hypot(uu - intr.cx, vv - intr.cy) / rmax)[use]

    out = {"count": int(np.count_nonzero(use)), "zenith_deg": zenith_deg}
    phi_meas = measured[use]
    dump_dir = Path(cfg.out) / "maps" if cfg.dump_maps else None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)
        image_io.write_pfm(dump_dir / f"extracted_{k:03d}.pfm",
                           np.where(use, measured, 0.0))
    if want_ppa:
        phi_ppa_map = kernels.ppa_phase_map(n_cam, vx, vy, vz)
        if dump_dir is not None:
            image_io.write_pfm(dump_dir / f"predicted_ppa_{k:03d}.pfm",
                               np.where(use, phi_ppa_map, 0.0))
        out["ppa"] = np.degrees(signed_phase_error(phi_meas, phi_ppa_map[use]))
    if want_opa:
        if math.hypot(n_cam[0], n_cam[1]) < 1e-12:
            out["opa_degenerate"] = True
        else:
            phi_o = opa_phase(n_cam)
            if dump_dir is not None:
                image_io.write_pfm(dump_dir / f"predicted_opa_{k:03d}.pfm",
                                   np.where(use, phi_o, 0.0))
            out["opa"] = np.degrees(signed_phase_error(phi_meas, phi_o))
    out["viewing_deg"] = viewing_deg
    out["az_diff_deg"] = az_diff_deg
    out["radial"] = radial
    return out


def run_model_accuracy(cfg):
    """Forward-model accuracy: predicted phase vs phase extracted from images."""
    root = Path(cfg.dataset)
    manifest = ds.load_manifest(root)
    spec = ds.load_scene(root)
    source = _resolve_source(cfg, "render")
    models = cfg.models()
    want_opa = ModelKind.OPA in models
    want_ppa = ModelKind.PPA in models

    acc = {}
    for m in ("opa", "ppa"):
        acc[m] = {
            "sum": 0.0, "sumsq": 0.0, "count": 0,
            "viewing": reports.BinAccumulator(0.0, 90.0, 2.0),
            "azimuth": reports.BinAccumulator(-180.0, 180.0, 4.0),
            "zenith": reports.BinAccumulator(0.0, 90.0, 2.0),
            "edge_sum": 0.0, "edge_count": 0,
            "center_sum": 0.0, "center_count": 0,
        }
    opa_degenerate_views = 0

    results = runtime.thread_map(
        lambda k: _accuracy_one_view(spec, root, manifest, cfg, k,
                                     want_opa, want_ppa, source),
        range(len(spec.poses)))

    for res in results:
        if res is None:
            continue
        if res.get("opa_degenerate"):
            opa_degenerate_views += 1
        for m in ("opa", "ppa"):
            if m not in res:
                continue
            err = res[m]
            a = acc[m]
            a["sum"] += float(np.sum(err))
            a["sumsq"] += float(np.sum(err * err))
            a["count"] += err.size
            a["viewing"].add(res["viewing_deg"], err)
            a["azimuth"].add(res["az_diff_deg"], err)
            a["zenith"].add(np.full(err.size, res["zenith_deg"]), err)
            edge = res["radial"] >= 0.8
            center = res["radial"] <= 0.2
            a["edge_sum"] += float(np.sum(np.abs(err[edge])))
            a["edge_count"] += int(np.count_nonzero(edge))
            a["center_sum"] += float(np.sum(np.abs(err[center])))
            a["center_count"] += int(np.count_nonzero(center))

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"views": len(spec.poses), "source": source,
               "opa_degenerate_views": opa_degenerate_views}
    tables = {}
    for model in models:
        m = model.value
        a = acc[m]
        if not a["count"]:
            continue
        mean = a["sum"] / a["count"]
        rmse = math.sqrt(a["sumsq"] / a["count"])
        edge_mean = a["edge_sum"] / a["edge_count"] if a["edge_count"] else None
        center_mean = (a["center_sum"] / a["center_count"]
                       if a["center_count"] else None)
        summary[m] = {
            "pixels": a["count"],
            "mean_deg": mean,
            "rmse_deg": rmse,
            "edge_mean_abs_deg": edge_mean,
            "center_mean_abs_deg": center_mean,
        }
        header = ("bin_lo_deg", "bin_hi_deg", "count", "mean_deg", "rmse_deg")
        for axis in ("viewing", "azimuth", "zenith"):
            name = f"accuracy_{m}_{axis}.csv"
            reports.write_csv(out_dir / name, header, a[axis].rows())
            tables[f"{m}_{axis}"] = name

    checks = {}
    noiseless = (spec.noise.intensity_sigma == 0 and spec.noise.aolp_sigma == 0
                 and cfg.blur_sigma == 0 and source in ("model", "render"))
    if want_ppa and "ppa" in summary:
        checks["ppa_rmse_below_1e-7_deg"] = (
            bool(summary["ppa"]["rmse_deg"] < 1e-7) if noiseless else None)
    if want_opa and "opa" in summary:
        checks["opa_rmse_above_5_deg"] = bool(summary["opa"]["rmse_deg"] > 5.0)
        em, cm = summary["opa"]["edge_mean_abs_deg"], summary["opa"]["center_mean_abs_deg"]
        checks["opa_edge_error_exceeds_center"] = (
            bool(em > cm) if (em is not None and cm is not None) else None)

    payload = {
        "schema_version": reports.SCHEMA_VERSION,
        "kind": "model-accuracy",
        "provenance": _provenance(cfg, manifest),
        "config": {
            "model": cfg.model, "dolp_threshold": cfg.dolp_threshold,
            "blur_sigma": cfg.blur_sigma, "source": source, "seed": cfg.seed,
        },
        "summary": summary,
        "checks": checks,
        "tables": tables,
    }
    return _finish_report(cfg, payload, out_dir / "model_accuracy.json")


# ---------------------------------------------------------------------------
# normal estimation


def _board_pixel_cache(spec, view):
    """Valid board pixels of a view with their rays and geometric phase."""
    rendered = render_view(spec, view)
    mask = rendered.gt_aolp.mask
    rows, cols = np.nonzero(mask)
    vx, vy, vz = ray_grid(spec.intrinsics)
    rx, ry, rz = vx[rows, cols], vy[rows, cols], vz[rows, cols]
    phase = canonical_phase(rendered.gt_aolp.values[rows, cols] - spec.aolp_shift)
    n_cam = rendered.gt_normal_cam
    return {"rows": rows, "cols": cols, "rx": rx, "ry": ry, "rz": rz,
            "phase": phase, "n_cam": n_cam, "rendered": rendered}


def run_estimate_single(cfg):
    """Per-view plane-normal estimation from one phase-angle map."""
    root = Path(cfg.dataset)
    manifest = ds.load_manifest(root)
    spec = ds.load_scene(root)
    source = _resolve_source(cfg, "model")
    sigma = math.radians(cfg.noise_aolp_deg)
    models = cfg.models()
    n_views = len(spec.poses)

    caches = {}
    rows_out = []
    records = []
    errors = {m.value: [] for m in models}
    ill = {m.value: 0 for m in models}
    for trial in range(cfg.trials):
        view = trial % n_views
        if view not in caches:
            caches.clear()  # keep one view resident
            caches[view] = _board_pixel_cache(spec, view)
            if source == "maps":
                maps = ds.load_view_maps(root, view)
                c = caches[view]
                c["phase"] = canonical_phase(
                    maps["aolp"].values[c["rows"], c["cols"]] - spec.aolp_shift)
            elif source == "images":
                frame = ds.load_view_frame(root, view, spec.intrinsics,
                                           manifest["png_scale"])
                if cfg.blur_sigma > 0:
                    frame = gaussian_blur(frame, cfg.blur_sigma)
                aolp, _, _ = extract_state(compute_stokes(frame),
                                           cfg.dolp_threshold)
                c = caches[view]
                keep = aolp.mask[c["rows"], c["cols"]]
                for key in ("rows", "cols", "rx", "ry", "rz"):
                    c[key] = c[key][keep]
                c["phase"] = canonical_phase(
                    aolp.values[c["rows"], c["cols"]] - spec.aolp_shift)
        c = caches[view]
        total = len(c["phase"])
        if total < 2:
            continue
        rng = _rng(cfg.seed, _STREAM_EST_SINGLE, trial)
        take = min(cfg.pixels, total)
        idx = rng.permutation(total)[:take]
        phase = c["phase"][idx]
        if sigma > 0:
            phase = phase + rng.normal(0.0, sigma, take)
        rx, ry, rz = c["rx"][idx], c["ry"][idx], c["rz"][idx]
        reference = unit(np.array([rx.mean(), ry.mean(), rz.mean()]))
        for model in models:
            mtm = kernels.constraint_mtm(phase, rx, ry, rz,
                                         model is ModelKind.PPA)
            system = ConstraintSystem.from_accumulated(mtm, take, model)
            try:
                est = solve_normal(system, reference)
            except IllConditioned as exc:
                ill[model.value] += 1
                rows_out.append((trial, view, model.value, take, "",
                                 exc.condition_ratio or 0.0, 0))
                continue
            err = float(angular_error_deg(est.normal, c["n_cam"]))
            errors[model.value].append(err)
            rows_out.append((trial, view, model.value, take, err,
                             est.condition_ratio, 1))
            rec = est.to_dict()
            rec.update({"views": 1, "pixels": take, "trial": trial,
                        "view": view, "model": model.value, "error_deg": err})
            records.append(rec)

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports.write_csv(
        out_dir / "estimate_single.csv",
        ("trial", "view", "model", "pixels", "error_deg", "condition_ratio", "ok"),
        rows_out)
    reports.dump_json(out_dir / "estimate_single_normals.json", records)
    summary = {"mode": "single", "source": source, "trials": cfg.trials,
               "pixels": cfg.pixels, "noise_aolp_deg": cfg.noise_aolp_deg}
    for m, errs in errors.items():
        summary[m] = reports.summarize_errors_deg(errs, ill[m])
    checks = {}
    if "ppa" in errors and errors["ppa"]:
        if sigma == 0 and spec.noise.aolp_sigma == 0 and source == "model":
            checks["single_view_noiseless_max_below_1e-6_rad"] = bool(
                math.radians(summary["ppa"]["max_deg"]) < 1e-6)
        else:
            checks["single_view_mean_below_1_deg"] = bool(
                summary["ppa"]["mean_deg"] < 1.0)
    payload = {
        "schema_version": reports.SCHEMA_VERSION,
        "kind": "estimate",
        "provenance": _provenance(cfg, manifest),
        "config": {"mode": "single", "model": cfg.model, "trials": cfg.trials,
                   "pixels": cfg.pixels, "noise_aolp_deg": cfg.noise_aolp_deg,
                   "source": source, "seed": cfg.seed},
        "summary": summary,
        "checks": checks,
        "tables": {"per_trial": "estimate_single.csv",
                   "normals": "estimate_single_normals.json"},
    }
    return _finish_report(cfg, payload, out_dir / "estimate.json")


def _multi_view_samples(cfg, spec, root, manifest, source, rng):
    """Sampled surface points, their visible views, rays and measured phases.

    Returns (points, sel, v_sel, phases, keep, R, C): the (T, 3) sampled
    world points, (T, Kmax) selected pose indices, (T, Kmax, 3)
    camera-frame rays, (T, Kmax) geometric phases (noise included), the
    mask of trials that found enough views, and the stacked pose arrays.
    """
    board = spec.board
    poses = spec.poses
    V = len(poses)
    T = cfg.trials
    kmax = max(cfg.sweep_views())
    intr = spec.intrinsics

    margin = 0.45
    pu = rng.uniform(-margin, margin, T) * board.width_mm
    pv = rng.uniform(-margin, margin, T) * board.height_mm
    points = (board.center + pu[:, None] * board.u_axis
              + pv[:, None] * board.v_axis)

    R = np.stack([p.rotation for p in poses])  # (V, 3, 3)
    C = np.stack([p.center for p in poses])  # (V, 3)
    diff = points[:, None, :] - C[None, :, :]  # (T, V, 3)
    p_cam = np.einsum("vji,tvi->tvj", R, diff)
    z = p_cam[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * p_cam[..., 0] / z + intr.cx
        v = intr.fy * p_cam[..., 1] / z + intr.cy
    in_bounds = ((z > 0) & (u >= 0) & (u <= intr.width - 1)
                 & (v >= 0) & (v <= intr.height - 1))
    norm = np.linalg.norm(p_cam, axis=-1)
    rays = p_cam / np.where(norm > 0, norm, 1.0)[..., None]
    n_cam = np.einsum("vji,i->vj", R, board.normal)  # (V, 3)
    facing = np.einsum("tvi,vi->tv", rays, n_cam) < -1e-6
    cross = np.cross(rays, np.broadcast_to(n_cam, rays.shape))
    nondeg = np.linalg.norm(cross, axis=-1) > 1e-9
    valid = in_bounds & facing & nondeg

    keys = rng.random((T, V))
    keys[~valid] = np.inf
    order = np.argsort(keys, axis=1)
    keep = np.count_nonzero(valid, axis=1) >= kmax
    sel = order[:, :kmax]  # (T, Kmax)

    ti = np.arange(T)[:, None]
    v_sel = rays[ti, sel]  # (T, Kmax, 3)
    n_sel = n_cam[sel]  # (T, Kmax, 3)

    if source == "model":
        ex = v_sel[..., 0] * n_sel[..., 2] - v_sel[..., 2] * n_sel[..., 0]
        ey = v_sel[..., 1] * n_sel[..., 2] - v_sel[..., 2] * n_sel[..., 1]
        phases = np.mod(-np.arctan2(ey, ex), np.pi)
    else:
        pix = np.stack([u[ti, sel], v[ti, sel]], axis=-1)  # (T, Kmax, 2)
        phases = np.zeros((T, kmax))
        sampled_ok = np.ones((T, kmax), dtype=bool)
        for view in np.unique(sel):
            where = sel == view
            if not np.any(where):
                continue
            if source == "maps":
                amap = ds.load_view_maps(root, int(view))["aolp"]
            else:
                frame = ds.load_view_frame(root, int(view), intr,
                                           manifest["png_scale"])
                if cfg.blur_sigma > 0:
                    frame = gaussian_blur(frame, cfg.blur_sigma)
                amap, _, _ = extract_state(compute_stokes(frame),
                                           cfg.dolp_threshold)
            vals, ok = sample_phase(amap, pix[where])
            phases[where] = canonical_phase(vals - spec.aolp_shift)
            sampled_ok[where] = ok
        keep = keep & np.all(sampled_ok, axis=1)
    if cfg.noise_aolp_deg > 0:
        phases = phases + rng.normal(
            0.0, math.radians(cfg.noise_aolp_deg), phases.shape)

    return points, sel, v_sel, phases, keep, R, C


def run_estimate_multi(cfg):
    """Multi-view normal estimation over sampled board points."""
    root = Path(cfg.dataset)
    manifest = ds.load_manifest(root)
    spec = ds.load_scene(root)
    source = _resolve_source(cfg, "model")
    models = cfg.models()
    ks = cfg.sweep_views()
    kmax = max(ks)
    if kmax > len(spec.poses):
        raise PolarimetryError(
            f"requested {kmax} views per estimate but the dataset has only "
            f"{len(spec.poses)} poses")
    rng = _rng(cfg.seed, _STREAM_EST_MULTI)

    points, sel, v_sel, phases, keep, R, C = _multi_view_samples(
        cfg, spec, root, manifest, source, rng)
    T = cfg.trials
    if not np.any(keep):
        raise PolarimetryError(
            f"no trial found {kmax} views seeing its sample point")

    R_sel = R[sel]  # (T, Kmax, 3, 3)
    ref0 = unit(points - C[sel[:, 0]])  # world ray of the first view
    gt = spec.board.normal

    s = np.sin(phases)
    c = np.cos(phases)
    per_model = {}
    for model in models:
        if model is ModelKind.PPA:
            w = -(v_sel[..., 1] * c + v_sel[..., 0] * s) / v_sel[..., 2]
        else:
            w = np.zeros_like(s)
        rows_cam = np.stack([s, c, w], axis=-1)
        rows_cam = rows_cam / np.linalg.norm(rows_cam, axis=-1, keepdims=True)
        rows_w = np.einsum("tki,tkij->tkj", rows_cam, R_sel)
        outers = np.einsum("tki,tkj->tkij", rows_w, rows_w)
        cums = np.cumsum(outers, axis=1)  # (T, Kmax, 3, 3)
        per_k = {}
        for k in ks:
            mtm = cums[:, k - 1]
            normals, cond, ok, evals = solve_normals_batched(mtm, ref0)
            ok = ok & keep
            err = angular_error_deg(normals, gt)
            per_k[k] = {"err": err, "ok": ok, "cond": cond,
                        "normals": normals, "evals": evals}
        per_model[model.value] = per_k

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    k_report = cfg.views if cfg.views in ks else ks[0]
    rows_out = []
    records = []
    for m, per_k in per_model.items():
        res = per_k[k_report]
        for t in range(T):
            rows_out.append((t, m, k_report,
                             res["err"][t] if res["ok"][t] else "",
                             res["cond"][t], int(res["ok"][t])))
            if res["ok"][t]:
                records.append({
                    "normal": [float(x) for x in res["normals"][t]],
                    "eigenvalues": [float(x) for x in res["evals"][t]],
                    "condition_ratio": float(res["cond"][t]),
                    "views": k_report, "pixels": k_report,
                    "trial": t, "model": m,
                    "error_deg": float(res["err"][t]),
                })
    reports.write_csv(
        out_dir / "estimate_multi.csv",
        ("trial", "model", "views", "error_deg", "condition_ratio", "ok"),
        rows_out)
    reports.dump_json(out_dir / "estimate_multi_normals.json", records)

    cdf_tables = {}
    for m, per_k in per_model.items():
        res = per_k[k_report]
        e = np.sort(res["err"][res["ok"]])
        if e.size:
            frac = np.arange(1, e.size + 1) / e.size
            step = max(1, e.size // 256)
            rows = list(zip(e[::step], frac[::step]))
            if rows[-1][0] != e[-1]:
                rows.append((e[-1], 1.0))
            name = f"estimate_multi_cdf_{m}.csv"
            reports.write_csv(out_dir / name,
                              ("error_deg", "cumulative_fraction"), rows)
            cdf_tables[f"cdf_{m}"] = name

    summary = {"mode": "multi", "source": source, "trials": cfg.trials,
               "views": k_report, "noise_aolp_deg": cfg.noise_aolp_deg,
               "trials_with_enough_views": int(np.count_nonzero(keep))}
    curves = {}
    for m, per_k in per_model.items():
        res = per_k[k_report]
        summary[m] = reports.summarize_errors_deg(
            res["err"][res["ok"]], int(np.count_nonzero(keep & ~res["ok"])))
        curve = []
        for k in ks:
            r = per_k[k]
            e = r["err"][r["ok"]]
            curve.append((k, int(e.size),
                          float(np.mean(e)) if e.size else 0.0,
                          float(np.median(e)) if e.size else 0.0,
                          float(np.mean(np.abs(e) < 25.0)) if e.size else 0.0))
        curves[m] = curve
    if len(ks) > 1:
        for m, curve in curves.items():
            reports.write_csv(
                out_dir / f"estimate_multi_curve_{m}.csv",
                ("views", "count", "mean_deg", "median_deg", "frac_below_25deg"),
                curve)
        summary["curves"] = {
            m: {str(row[0]): {"mean_deg": row[2], "median_deg": row[3],
                              "frac_below_25deg": row[4]}
                for row in curve}
            for m, curve in curves.items()
        }

    checks = {}
    if "ppa" in per_model and "opa" in per_model:
        sp, so = summary.get("ppa", {}), summary.get("opa", {})
        if sp.get("count") and so.get("count"):
            checks["ppa_frac25_exceeds_opa"] = bool(
                sp["frac_below_25deg"] > so["frac_below_25deg"])
            checks["ppa_median_below_half_opa"] = bool(
                sp["median_deg"] < 0.5 * so["median_deg"])
    if len(ks) > 1 and "ppa" in curves:
        means = [row[2] for row in curves["ppa"]]
        checks["ppa_mean_monotone_within_0p5deg"] = bool(all(
            means[i + 1] <= means[i] + 0.5 for i in range(len(means) - 1)))

    payload = {
        "schema_version": reports.SCHEMA_VERSION,
        "kind": "estimate",
        "provenance": _provenance(cfg, manifest),
        "config": {"mode": "multi", "model": cfg.model, "trials": cfg.trials,
                   "views": cfg.views, "sweep": cfg.sweep,
                   "noise_aolp_deg": cfg.noise_aolp_deg, "source": source,
                   "seed": cfg.seed},
        "summary": summary,
        "checks": checks,
        "tables": {"per_trial": "estimate_multi.csv",
                   "normals": "estimate_multi_normals.json", **cdf_tables},
    }
    return _finish_report(cfg, payload, out_dir / "estimate.json")


def run_estimate(cfg):
    if cfg.mode == "single":
        return run_estimate_single(cfg)
    if cfg.mode == "multi":
        return run_estimate_multi(cfg)
    raise PolarimetryError(f"unknown estimate mode {cfg.mode!r}")


# ---------------------------------------------------------------------------
# contours


def run_contours(cfg):
    """Iso-depth vs perspective contour propagation on a shared pixel track."""
    root = Path(cfg.dataset)
    manifest = ds.load_manifest(root)
    spec = ds.load_scene(root)
    if len(spec.poses) < 2:
        raise PolarimetryError("contour comparison needs at least 2 views")
    if _resolve_source(cfg, "render") not in ("model", "render"):
        raise PolarimetryError(
            "contour comparison runs on the synthetic oracle (source "
            "model/render); seed depths and the reference plane come from "
            "the scene geometry")
    ia, ib = cfg.view_pair
    sigma = math.radians(cfg.noise_aolp_deg)
    intr = spec.intrinsics
    plane = spec.board.plane

    map_a, view_a = _geometric_phase_maps(spec, ia, sigma, (_STREAM_CONTOURS,))
    map_b, view_b = _geometric_phase_maps(spec, ib, sigma, (_STREAM_CONTOURS,))
    pose_a, pose_b = view_a.pose, view_b.pose

    seeds = spec.board.edge_points(cfg.num_seeds, inset=0.05)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "contours").mkdir(exist_ok=True)

    iso_sq = []
    ppa_sq = []
    used = 0
    skipped = 0
    normal_errors = []
    normal_records = []
    tables = {}
    for i, seed_world in enumerate(seeds):
        p_cam = pose_a.world_to_camera(seed_world)
        if p_cam[2] <= 0:
            skipped += 1
            continue
        px_a = project(intr, p_cam)
        try:
            iso = trace_iso_depth(map_a, px_a, float(p_cam[2]), intr,
                                  step=cfg.step, max_steps=cfg.max_steps,
                                  pose=pose_a)
        except PolarimetryError:
            skipped += 1
            continue
        p_cam_b = pose_b.world_to_camera(seed_world)
        if p_cam_b[2] <= 0:
            skipped += 1
            continue
        px_b = project(intr, p_cam_b)
        _, ok_a = sample_phase(map_a, [px_a])
        _, ok_b = sample_phase(map_b, [px_b])
        if not (ok_a[0] and ok_b[0]):
            skipped += 1
            continue
        # two-view observations from the forward model at the exact rays
        # (the gridded map is for tracing; bilinear resampling would leak
        # interpolation error into the noiseless estimates)
        obs_rng = _rng(cfg.seed, _STREAM_CONTOUR_OBS, i)
        values = []
        for pose, p_cam_k in ((pose_a, p_cam), (pose_b, p_cam_b)):
            ray = p_cam_k / np.linalg.norm(p_cam_k)
            phi = ppa_phase(pose.rotation @ spec.board.normal, ray)
            values.append(canonical_phase(phi + obs_rng.normal(0.0, sigma))
                          if sigma > 0 else phi)
        try:
            system = build_multi_view_system(
                [(float(values[0]), px_a, intr, pose_a),
                 (float(values[1]), px_b, intr, pose_b)], ModelKind.PPA)
            est = solve_normal(system, unit(seed_world - pose_a.center))
        except PolarimetryError:
            skipped += 1
            continue
        err_deg = float(angular_error_deg(est.normal, spec.board.normal))
        normal_errors.append(err_deg)
        rec = est.to_dict()
        rec.update({"views": 2, "pixels": 2, "seed_point": i,
                    "error_deg": err_deg})
        normal_records.append(rec)
        ppa_c = trace_ppa(iso.pixel_track, seed_world, est.normal, intr,
                          pose=pose_a, seed_index=iso.seed_index)
        d_iso = plane.signed_distance(iso.points)
        d_ppa = plane.signed_distance(ppa_c.points)
        iso_sq.append(d_iso * d_iso)
        ppa_sq.append(d_ppa * d_ppa)
        used += 1
        for method, contour, dist in (("iso", iso, d_iso), ("ppa", ppa_c, d_ppa)):
            name = f"contours/contour_{method}_{i:02d}.csv"
            reports.write_csv(
                out_dir / name,
                ("step", "u", "v", "X", "Y", "Z", "point_to_plane_mm"),
                [(k, contour.pixel_track[k, 0], contour.pixel_track[k, 1],
                  contour.points[k, 0], contour.points[k, 1],
                  contour.points[k, 2], abs(dist[k]))
                 for k in range(len(contour))])
            tables[f"{method}_{i:02d}"] = name

    if not used:
        raise PolarimetryError("no contour seed could be traced")
    reports.dump_json(out_dir / "contours_normals.json", normal_records)
    tables["normals"] = "contours_normals.json"
    rmse_iso = float(np.sqrt(np.mean(np.concatenate(iso_sq))))
    rmse_ppa = float(np.sqrt(np.mean(np.concatenate(ppa_sq))))
    ratio = rmse_ppa / rmse_iso if rmse_iso > 0 else float("inf")

    noiseless = sigma == 0 and spec.noise.aolp_sigma == 0
    checks = {
        "ppa_to_iso_rmse_ratio_le_0.25": bool(ratio <= 0.25) if sigma > 0 else None,
        "ppa_rmse_below_1e-6_mm_noiseless": (
            bool(rmse_ppa < 1e-6) if noiseless else None),
    }
    summary = {
        "seeds": cfg.num_seeds, "seeds_used": used, "seeds_skipped": skipped,
        "step_px": cfg.step, "noise_aolp_deg": cfg.noise_aolp_deg,
        "view_pair": list(cfg.view_pair),
        "points": int(sum(len(x) for x in iso_sq)),
        "rmse_iso_depth_mm": rmse_iso,
        "rmse_ppa_mm": rmse_ppa,
        "rmse_ratio_ppa_over_iso": ratio,
        "two_view_normal_mean_error_deg": (
            float(np.mean(normal_errors)) if normal_errors else None),
    }
    payload = {
        "schema_version": reports.SCHEMA_VERSION,
        "kind": "contours",
        "provenance": _provenance(cfg, manifest),
        "config": {"noise_aolp_deg": cfg.noise_aolp_deg, "step": cfg.step,
                   "max_steps": cfg.max_steps, "num_seeds": cfg.num_seeds,
                   "view_pair": list(cfg.view_pair), "seed": cfg.seed},
        "summary": summary,
        "checks": checks,
        "tables": tables,
    }
    return _finish_report(cfg, payload, out_dir / "contours.json")


# ---------------------------------------------------------------------------
# report merging


def run_report(inputs, out_path):
    """Merge report JSON files; returns (payload, all_pass)."""
    payloads = []
    for p in inputs:
        payload = reports.load_json(p)
        reports.validate_report(payload)
        payloads.append(payload)
    merged, all_pass = reports.merge_reports(payloads)
    reports.validate_report(merged)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    reports.dump_json(out_path, merged)
    csv_path = out_path.with_suffix(".checks.csv")
    reports.write_csv(csv_path, ("check", "status"),
                      [(k, {True: "pass", False: "fail", None: "skipped"}[v])
                       for k, v in sorted(merged["checks"].items())])
    return merged, all_pass
