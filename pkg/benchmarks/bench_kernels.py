"""Benchmark the compiled kernels against the pure-numpy fallback.

Run from the repository root:

    python benchmarks/bench_kernels.py

Sizes mirror the real workloads: a full 640x480 phase map, a 300k-pixel
constraint accumulation (the upper end of the single-view estimates),
and a 4000-step contour trace.
"""

import time

import numpy as np

from ppa import kernels


def best_of(fn, repeats=7):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_inputs(seed=0):
    rng = np.random.default_rng(seed)
    h, w = 480, 640
    u, v = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    x = (u - (w - 1) / 2) / 340.0
    y = (v - (h - 1) / 2) / 340.0
    norm = np.sqrt(x * x + y * y + 1.0)
    vx, vy, vz = x / norm, y / norm, 1.0 / norm
    n = np.array([0.2, -0.3, -0.93])
    n /= np.linalg.norm(n)

    m = 300000
    rays = rng.normal(size=(m, 3))
    rays[:, 2] = np.abs(rays[:, 2]) + 0.2
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    phi = rng.uniform(0, np.pi, m)

    values = np.mod(np.linspace(0, 4, w)[None, :]
                    + 0.3 * np.sin(np.linspace(0, 6, h))[:, None], np.pi)
    cos2, sin2 = np.cos(2 * values), np.sin(2 * values)
    mask = np.ones((h, w), dtype=np.uint8)
    return {
        "phase_map": (n, vx, vy, vz),
        "mtm": (phi, rays[:, 0], rays[:, 1], rays[:, 2]),
        "trace": (cos2, sin2, mask),
    }


def run(backend, inputs):
    impl = kernels.get(backend)
    n, vx, vy, vz = inputs["phase_map"]
    phi, rx, ry, rz = inputs["mtm"]
    cos2, sin2, mask = inputs["trace"]
    return {
        "phase map 640x480": best_of(
            lambda: impl.ppa_phase_const_normal(n[0], n[1], n[2], vx, vy, vz)),
        "M^T M 300k rows": best_of(
            lambda: impl.constraint_mtm(phi, rx, ry, rz, True)),
        "trace 4000 steps": best_of(
            lambda: impl.trace_track(cos2, sin2, mask, 320.0, 240.0,
                                     1.0, 0.3, 0.5, 4000)),
    }


def main():
    inputs = make_inputs()
    results = {b: run(b, inputs) for b in kernels.available()}
    names = list(next(iter(results.values())))
    width = max(len(n) for n in names)
    header = f"{'kernel':<{width}}" + "".join(
        f"  {b + ' (ms)':>14}" for b in results)
    if "native" in results and "numpy" in results:
        header += f"  {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name in names:
        row = f"{name:<{width}}"
        for b in results:
            row += f"  {results[b][name] * 1e3:>14.3f}"
        if "native" in results and "numpy" in results:
            row += f"  {results['numpy'][name] / results['native'][name]:>8.1f}x"
        print(row)
    if "native" not in results:
        print("\n(compiled extension not built; showing numpy fallback only)")


if __name__ == "__main__":
    main()
