"""Acceptance suite: each test exercises one gate criterion at its stated
size and tolerance and prints one pass/fail line (run with -s to see them
alongside passing tests).

The absolute numbers of the physical-capture experiments are not
reproducible synthetically; these gates combine exact property checks
with the reproducible ratios/orderings on the synthetic oracle.
"""

import time

import numpy as np
import pytest

from ppa import dataset as ds
from ppa.angles import phase_distance
from ppa.errors import DegenerateNormal, DegenerateRayNormal
from ppa.evaluation import (
    EvalConfig,
    SynthConfig,
    run_contours,
    run_estimate,
    run_model_accuracy,
    run_report,
    run_synth,
)
from ppa.geometry import CameraIntrinsics
from ppa.models import classify_equivalence, opa_phase, ppa_phase
from ppa.polarization import (
    PolarizationFrame,
    compute_stokes,
    extract_state,
    synthesize_intensities,
)


def _criterion(num, ok, desc):
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {desc}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def wide_fov_dataset(tmp_path_factory):
    """Noiseless 86.6-degree-FOV dataset at full 640x480 resolution."""
    out = tmp_path_factory.mktemp("acc") / "wide"
    run_synth(SynthConfig(out=str(out), views=6, width=640, height=480,
                          fov_deg=86.6, distance_mm=(250.0, 400.0),
                          polar_deg=(25.0, 50.0), seed=7,
                          write_images=False, write_maps=False))
    return out


@pytest.fixture(scope="module")
def pose_rich_dataset(tmp_path_factory):
    """Many-pose dataset for the multi-view trials."""
    out = tmp_path_factory.mktemp("acc") / "poses"
    run_synth(SynthConfig(out=str(out), views=60, width=320, height=240,
                          fov_deg=86.6, distance_mm=(250.0, 450.0),
                          polar_deg=(15.0, 55.0), seed=7,
                          write_images=False, write_maps=False))
    return out


@pytest.fixture(scope="module")
def contour_dataset(tmp_path_factory):
    """Tilted plane (about 40 degrees) at 500 mm, 86.6-degree FOV, 2 views."""
    out = tmp_path_factory.mktemp("acc") / "contour"
    run_synth(SynthConfig(out=str(out), views=2, width=640, height=480,
                          fov_deg=86.6, distance_mm=(480.0, 520.0),
                          polar_deg=(38.0, 42.0), seed=21,
                          write_images=False, write_maps=False))
    return out


def test_criterion_1_stokes_round_trip(rng):
    t0 = time.perf_counter()
    n = 10000
    iavg = rng.uniform(1e-3, 4.0, n)
    rho = rng.uniform(0.0, 1.0, n)
    phi = rng.uniform(0.0, np.pi, n)
    i0, i45, i90, i135 = synthesize_intensities(iavg, rho, phi)
    cam = CameraIntrinsics(100.0, 100.0, n / 2, 0.5, n, 1)
    frame = PolarizationFrame(*(x.reshape(1, n) for x in (i0, i45, i90, i135)),
                              intrinsics=cam)
    aolp, dolp, iavg_hat = extract_state(compute_stokes(frame), 0.0)
    ok_iavg = np.max(np.abs(iavg_hat.values.ravel() - iavg)) < 1e-12
    ok_rho = np.max(np.abs(dolp.values.ravel() - rho)) < 1e-12
    pos = rho > 0
    ok_phi = np.max(phase_distance(aolp.values.ravel()[pos], phi[pos])) < 1e-12
    elapsed = time.perf_counter() - t0
    _criterion(1, ok_iavg and ok_rho and ok_phi and elapsed < 1.0,
               f"10k-state Stokes round trip within 1e-12 in {elapsed:.3f} s")


def test_criterion_2_constraint_exactness(rng):
    t0 = time.perf_counter()
    n = 10000
    v = rng.normal(size=(n, 3))
    v[:, 2] = np.abs(v[:, 2]) + 0.05
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    nrm = rng.normal(size=(n, 3))
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    flip = np.sum(nrm * v, axis=1) > 0
    nrm[flip] = -nrm[flip]
    keep = np.linalg.norm(np.cross(nrm, v), axis=1) > 1e-6
    v, nrm = v[keep], nrm[keep]

    ex = v[:, 0] * nrm[:, 2] - v[:, 2] * nrm[:, 0]
    ey = v[:, 1] * nrm[:, 2] - v[:, 2] * nrm[:, 1]
    phi_p = np.mod(-np.arctan2(ey, ex), np.pi)
    s, c = np.sin(phi_p), np.cos(phi_p)
    w = -(v[:, 1] * c + v[:, 0] * s) / v[:, 2]
    dots_p = s * nrm[:, 0] + c * nrm[:, 1] + w * nrm[:, 2]
    ok_ppa = np.max(np.abs(dots_p)) < 1e-12

    az = np.hypot(nrm[:, 0], nrm[:, 1]) > 1e-6
    phi_o = np.mod(-np.arctan2(nrm[az, 1], nrm[az, 0]), np.pi)
    dots_o = np.sin(phi_o) * nrm[az, 0] + np.cos(phi_o) * nrm[az, 1]
    ok_opa = np.max(np.abs(dots_o)) < 1e-12
    elapsed = time.perf_counter() - t0
    _criterion(2, ok_ppa and ok_opa and elapsed < 1.0,
               f"constraint rows annihilate {keep.sum()} random normals "
               f"within 1e-12 in {elapsed:.3f} s")


def test_criterion_3_equivalence_cases(rng):
    S = np.sqrt(0.5)
    instances = []
    # case 1: axial ray
    instances.append((np.array([0.3, -0.5, -np.sqrt(1 - 0.34)]),
                      np.array([0.0, 0.0, 1.0])))
    # case 2: aligned azimuths (PoI perpendicular to the image plane)
    instances.append((np.array([S, 0.0, -S]), np.array([S, 0.0, S])))
    # case 3: normal near the optical axis, azimuth-aligned approach
    t = 1e-5
    v3 = np.array([0.3, -0.4, np.sqrt(1 - 0.25)])
    az = np.arctan2(v3[1], v3[0])
    instances.append((np.array([t * np.cos(az), t * np.sin(az),
                                -np.sqrt(1 - t * t)]), v3))
    # case 4: normal perpendicular to the optical axis
    instances.append((np.array([np.cos(0.4), -np.sin(0.4), 0.0]),
                      np.array([0.2, 0.3, np.sqrt(1 - 0.13)])))
    covered = set()
    ok = True
    for n, v in instances:
        cases = classify_equivalence(n, v)
        covered |= cases
        ok &= bool(cases)
        ok &= phase_distance(ppa_phase(n, v), opa_phase(n)) < 1e-9
    ok &= covered >= {1, 2, 3, 4}
    # a generic non-equivalent instance differs measurably
    n_bad = np.array([0.0, S, -S])
    v_bad = np.array([S, 0.0, S])
    ok &= not classify_equivalence(n_bad, v_bad)
    ok &= phase_distance(ppa_phase(n_bad, v_bad), opa_phase(n_bad)) > 1e-3
    _criterion(3, ok, "all four equivalence cases agree within 1e-9; "
                      "generic pair differs by more than 1e-3")


def test_criterion_4_forward_model_accuracy(wide_fov_dataset, tmp_path):
    t0 = time.perf_counter()
    payload = run_model_accuracy(EvalConfig(
        dataset=str(wide_fov_dataset), out=str(tmp_path), blur_sigma=0.0,
        source="render", seed=0))
    s = payload["summary"]
    elapsed = time.perf_counter() - t0
    ok = (s["ppa"]["rmse_deg"] < 1e-7
          and s["opa"]["rmse_deg"] > 5.0
          and s["opa"]["edge_mean_abs_deg"] > s["opa"]["center_mean_abs_deg"]
          and elapsed < 30.0)
    _criterion(4, ok,
               f"PPA rmse {s['ppa']['rmse_deg']:.2e} deg < 1e-7, OPA rmse "
               f"{s['opa']['rmse_deg']:.1f} deg > 5, edge "
               f"{s['opa']['edge_mean_abs_deg']:.1f} > center "
               f"{s['opa']['center_mean_abs_deg']:.1f} deg in {elapsed:.1f} s")


def test_criterion_5_single_view_estimation(wide_fov_dataset, tmp_path):
    t0 = time.perf_counter()
    clean = run_estimate(EvalConfig(
        dataset=str(wide_fov_dataset), out=str(tmp_path / "clean"),
        mode="single", model="ppa", trials=6, pixels=100000, seed=0))
    noisy = run_estimate(EvalConfig(
        dataset=str(wide_fov_dataset), out=str(tmp_path / "noisy"),
        mode="single", model="ppa", trials=50, pixels=100000,
        noise_aolp_deg=2.0, seed=0))
    elapsed = time.perf_counter() - t0
    max_clean_rad = np.radians(clean["summary"]["ppa"]["max_deg"])
    max_noisy_deg = noisy["summary"]["ppa"]["max_deg"]
    count = noisy["summary"]["ppa"]["count"]
    ok = (max_clean_rad < 1e-6 and max_noisy_deg < 1.0 and count == 50
          and elapsed < 60.0)
    _criterion(5, ok,
               f"noiseless max {max_clean_rad:.2e} rad < 1e-6; sigma=2deg "
               f"100k-pixel max {max_noisy_deg:.3f} deg < 1 over 50 trials "
               f"in {elapsed:.1f} s")


def test_criterion_6_multi_view_ordering(pose_rich_dataset, tmp_path):
    t0 = time.perf_counter()
    payload = run_estimate(EvalConfig(
        dataset=str(pose_rich_dataset), out=str(tmp_path), mode="multi",
        views=3, trials=1000, noise_aolp_deg=2.0, sweep="2:20", seed=0))
    s = payload["summary"]
    elapsed = time.perf_counter() - t0
    frac_ok = s["ppa"]["frac_below_25deg"] > s["opa"]["frac_below_25deg"]
    median_ok = s["ppa"]["median_deg"] < 0.5 * s["opa"]["median_deg"]
    means = [s["curves"]["ppa"][str(k)]["mean_deg"] for k in range(2, 21)]
    monotone_ok = all(means[i + 1] <= means[i] + 0.5
                      for i in range(len(means) - 1))
    ok = frac_ok and median_ok and monotone_ok and elapsed < 180.0
    _criterion(6, ok,
               f"K=3 sigma=2deg 1000 trials: PPA frac<25deg "
               f"{s['ppa']['frac_below_25deg']:.3f} > OPA "
               f"{s['opa']['frac_below_25deg']:.3f}; PPA median "
               f"{s['ppa']['median_deg']:.2f} < half of OPA "
               f"{s['opa']['median_deg']:.2f}; mean non-increasing K=2..20 "
               f"(+0.5deg tol) in {elapsed:.1f} s")


def test_criterion_7_contour_ratio(contour_dataset, tmp_path):
    t0 = time.perf_counter()
    clean = run_contours(EvalConfig(dataset=str(contour_dataset),
                                    out=str(tmp_path / "clean"), seed=0))
    noisy = run_contours(EvalConfig(dataset=str(contour_dataset),
                                    out=str(tmp_path / "noisy"),
                                    noise_aolp_deg=2.0, seed=0))
    elapsed = time.perf_counter() - t0
    ratio = noisy["summary"]["rmse_ratio_ppa_over_iso"]
    clean_ppa = clean["summary"]["rmse_ppa_mm"]
    ok = (ratio <= 0.25 and clean_ppa < 1e-6
          and noisy["summary"]["seeds_used"] == 20
          and clean["summary"]["step_px"] == 0.5
          and elapsed < 30.0)
    _criterion(7, ok,
               f"20 seeds, 0.5 px steps: noisy PPA/iso rmse ratio "
               f"{ratio:.3f} <= 0.25 ({noisy['summary']['rmse_ppa_mm']:.2f} vs "
               f"{noisy['summary']['rmse_iso_depth_mm']:.2f} mm); noiseless "
               f"PPA rmse {clean_ppa:.2e} mm < 1e-6 in {elapsed:.1f} s")


def test_criterion_8_degeneracy_handling():
    z = np.array([0.0, 0.0, 1.0])
    ok = True
    try:
        ppa_phase(z, z)
        ok = False
    except DegenerateRayNormal:
        pass
    try:
        opa_phase(z)
        ok = False
    except DegenerateNormal:
        pass
    # the same normal with an off-axis ray is fine under the perspective model
    v = np.array([0.3, 0.2, np.sqrt(1 - 0.13)])
    phi = ppa_phase(z, v)
    ok &= 0.0 <= phi < np.pi
    _criterion(8, ok, "parallel ray/normal and axial-normal OPA raise; "
                      "off-axis PPA succeeds for the same normal")


def test_criterion_9_pipeline_determinism(tmp_path):
    def pipeline(root):
        data = root / "data"
        run_synth(SynthConfig(out=str(data), views=4, width=192, height=144,
                              distance_mm=(250.0, 400.0),
                              polar_deg=(25.0, 50.0), noise_intensity=0.005,
                              seed=5))
        run_model_accuracy(EvalConfig(dataset=str(data), out=str(root / "acc"),
                                      blur_sigma=1.0, source="render", seed=5))
        run_estimate(EvalConfig(dataset=str(data), out=str(root / "est"),
                                mode="multi", views=3, trials=200,
                                noise_aolp_deg=2.0, seed=5))
        run_contours(EvalConfig(dataset=str(data), out=str(root / "cont"),
                                noise_aolp_deg=2.0, seed=5, max_steps=500))
        run_report([root / "acc" / "model_accuracy.json",
                    root / "est" / "estimate.json",
                    root / "cont" / "contours.json"], root / "combined.json")

    pipeline(tmp_path / "a")
    pipeline(tmp_path / "b")
    fa = ds.dataset_file_bytes(tmp_path / "a")
    fb = ds.dataset_file_bytes(tmp_path / "b")
    same_names = fa.keys() == fb.keys()
    diffs = [k for k in fa if fa[k] != fb.get(k)]
    kinds = {k.rsplit(".", 1)[-1] for k in fa}
    ok = same_names and not diffs and {"json", "csv", "pfm", "png"} <= kinds
    _criterion(9, ok,
               f"two pipeline runs produced byte-identical outputs "
               f"({len(fa)} files covering {sorted(kinds)})"
               + (f"; differing: {diffs[:5]}" if diffs else ""))
