"""Pure-numpy implementations of the hot kernels.

Used as the fallback when the compiled extension is unavailable, and as
the reference the extension is tested against.  The tracing loop matches
the compiled version bit for bit (same scalar libm calls in the same
order); the elementwise kernels agree to within a couple of ulp (numpy's
vectorized transcendentals vs libm) and the matrix accumulation differs
only in summation order.
"""

import math

import numpy as np

NAME = "numpy"


def ppa_phase_const_normal(nx, ny, nz, vx, vy, vz):
    """Perspective phase angle of one normal over arrays of viewing rays.

    Inputs are float64 arrays of identical shape (the normal components
    are scalars); returns canonical phases in [0, pi).  Degenerate pixels
    (ray parallel to the normal) come out as whatever atan2(0, 0) gives;
    callers mask them separately.
    """
    ex = vx * nz - vz * nx
    ey = vy * nz - vz * ny
    return np.mod(-np.arctan2(ey, ex), np.pi)


def constraint_mtm(phi, vx, vy, vz, ppa):
    """Accumulate M^T M from per-observation phases and rays.

    Rows are [sin phi, cos phi, w] with w = -(vy cos + vx sin)/vz for the
    perspective model and w = 0 for the orthographic one; each row is
    scaled to unit norm before accumulation.  Returns a (3, 3) float64
    matrix; the row count is ``phi.size``.
    """
    s = np.sin(phi)
    c = np.cos(phi)
    if ppa:
        w = -(vy * c + vx * s) / vz
    else:
        w = np.zeros_like(s)
    inv = 1.0 / np.sqrt(s * s + c * c + w * w)
    rows = np.stack([s * inv, c * inv, w * inv], axis=-1)
    return rows.T @ rows


def trace_track(cos2, sin2, valid, u0, v0, du0, dv0, step, max_steps):
    """Follow the direction field perpendicular to the phase angle.

    ``cos2``/``sin2`` hold cos(2 phi)/sin(2 phi) of the phase map (H, W);
    ``valid`` is its uint8 validity mask.  Starting from (u0, v0) with
    direction hint (du0, dv0), repeatedly samples the phase (mod-pi-aware
    bilinear interpolation), steps ``step`` pixels along the tangent
    [sin phi, cos phi] signed for continuity, and stops at the mask or
    image boundary or after ``max_steps`` steps.  Returns the visited
    pixel positions as an (N, 2) array including the start.
    """
    h, w = valid.shape
    u, v = float(u0), float(v0)
    du, dv = float(du0), float(dv0)
    pts = [(u, v)]
    for _ in range(int(max_steps)):
        ok, c, s = _sample2(cos2, sin2, valid, u, v, h, w)
        if not ok:
            break
        phi = 0.5 * math.atan2(s, c)
        tu = math.sin(phi)
        tv = math.cos(phi)
        if tu * du + tv * dv < 0.0:
            tu = -tu
            tv = -tv
        u = u + step * tu
        v = v + step * tv
        if not _sampleable(valid, u, v, h, w):
            break
        pts.append((u, v))
        du, dv = tu, tv
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def _cell(u, v, h, w):
    if not (0.0 <= u <= w - 1.0 and 0.0 <= v <= h - 1.0):
        return None
    i = int(math.floor(u))
    j = int(math.floor(v))
    if i > w - 2:
        i = w - 2
    if j > h - 2:
        j = h - 2
    return i, j, u - i, v - j


def _sampleable(valid, u, v, h, w):
    cell = _cell(u, v, h, w)
    if cell is None:
        return False
    i, j, _, _ = cell
    return bool(
        valid[j, i] and valid[j, i + 1] and valid[j + 1, i] and valid[j + 1, i + 1]
    )


def _sample2(cos2, sin2, valid, u, v, h, w):
    cell = _cell(u, v, h, w)
    if cell is None:
        return False, 0.0, 0.0
    i, j, fu, fv = cell
    if not (
        valid[j, i] and valid[j, i + 1] and valid[j + 1, i] and valid[j + 1, i + 1]
    ):
        return False, 0.0, 0.0
    w00 = (1.0 - fu) * (1.0 - fv)
    w10 = fu * (1.0 - fv)
    w01 = (1.0 - fu) * fv
    w11 = fu * fv
    c = (
        w00 * cos2[j, i]
        + w10 * cos2[j, i + 1]
        + w01 * cos2[j + 1, i]
        + w11 * cos2[j + 1, i + 1]
    )
    s = (
        w00 * sin2[j, i]
        + w10 * sin2[j, i + 1]
        + w01 * sin2[j + 1, i]
        + w11 * sin2[j + 1, i + 1]
    )
    return True, c, s
