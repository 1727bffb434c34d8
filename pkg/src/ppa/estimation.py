"""Least-squares surface-normal estimation from phase-angle constraints.

Every observation contributes one row m with m . n = 0; stacking P rows
gives a coefficient matrix M whose null direction (the eigenvector of
M^T M for the smallest eigenvalue) is the normal, up to sign.  The sign
is fixed by visibility: the normal must face the camera, n . v < 0 for
the reference viewing ray.  Multi-view rows are rotated into the world
frame as m^T R so they constrain the world-frame normal directly.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    EmptySystem,
    IllConditioned,
    NoValidPixels,
    PolarimetryError,
    TooFewViews,
)
from .geometry import pixel_rays, unit
from .models import ModelKind, ppa_constraint_row, opa_constraint_row

DEFAULT_COND_THRESHOLD = 1e-6
TIE_TOL = 1e-9


@dataclass(frozen=True)
class ConstraintSystem:
    """Stacked constraint rows, or their accumulated M^T M.

    ``rows`` is an (N, 3) array of raw (unnormalized) coefficients when
    available; bulk builders accumulate M^T M directly (rows=None) so
    memory stays O(1) in the pixel count.  ``frame`` is "camera" or
    "world".
    """

    model: ModelKind
    frame: str
    count: int
    rows: np.ndarray = None
    mtm: np.ndarray = None
    views: int = 1

    def normal_matrix(self):
        """M^T M over unit-normalized rows."""
        if self.mtm is not None:
            return self.mtm
        rows = self.rows / np.linalg.norm(self.rows, axis=1, keepdims=True)
        return rows.T @ rows

    @classmethod
    def from_rows(cls, rows, model, frame="camera", views=1):
        arr = np.atleast_2d(np.asarray(rows, dtype=float))
        if arr.shape[1] != 3:
            raise PolarimetryError("constraint rows must be 3-vectors")
        if not np.all(np.isfinite(arr)):
            raise PolarimetryError("constraint rows must be finite")
        return cls(model=model, frame=frame, count=arr.shape[0], rows=arr, views=views)

    @classmethod
    def from_accumulated(cls, mtm, count, model, frame="camera", views=1):
        return cls(model=model, frame=frame, count=int(count),
                   mtm=np.asarray(mtm, dtype=float), views=views)


@dataclass(frozen=True)
class NormalEstimate:
    normal: np.ndarray
    eigenvalues: np.ndarray  # ascending, length 3
    condition_ratio: float  # second-smallest over largest eigenvalue
    inlier_count: int

    def to_dict(self):
        return {
            "normal": [float(x) for x in self.normal],
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "condition_ratio": float(self.condition_ratio),
            "inliers": int(self.inlier_count),
        }


def _solve_mtm(mtm, reference_ray, cond_threshold):
    evals, evecs = np.linalg.eigh(mtm)
    lam1, lam2, lam3 = evals
    if lam3 <= 0:
        raise IllConditioned("constraint matrix is zero", evals, 0.0)
    cond = lam2 / lam3
    if cond < cond_threshold:
        raise IllConditioned(
            f"rank-deficient system: condition ratio {cond:.3e} below "
            f"{cond_threshold:.1e}", evals, cond)
    if lam2 - lam1 <= TIE_TOL * lam3:
        raise IllConditioned(
            "ambiguous null space: two smallest eigenvalues coincide", evals, cond)
    n = evecs[:, 0]
    if float(n @ unit(reference_ray)) > 0:
        n = -n
    return n, evals, cond


def solve_normal(system, reference_ray, cond_threshold=DEFAULT_COND_THRESHOLD,
                 robust=False):
    """Normal estimate from a constraint system.

    ``reference_ray`` is the viewing ray of any one observation, in the
    system's frame; the estimate is flipped to face it (n . ray < 0).
    Raises EmptySystem below two rows and IllConditioned when the system
    does not pin down a unique direction (condition ratio lambda2/lambda3
    under ``cond_threshold``, or a tied null space).

    With ``robust=True`` (requires materialized rows) one trimming pass
    drops rows whose residual deviates from the median by more than three
    times the median absolute deviation, then re-solves.
    """
    if system.count < 2:
        raise EmptySystem(f"need at least 2 constraint rows, got {system.count}")
    n, evals, cond = _solve_mtm(system.normal_matrix(), reference_ray, cond_threshold)
    count = system.count
    if robust:
        if system.rows is None:
            raise PolarimetryError("robust trimming needs materialized rows")
        rows = system.rows / np.linalg.norm(system.rows, axis=1, keepdims=True)
        res = rows @ n
        med = np.median(res)
        mad = np.median(np.abs(res - med))
        if mad > 0:
            keep = np.abs(res - med) <= 3.0 * mad
            if 2 <= np.count_nonzero(keep) < count:
                kept = rows[keep]
                n, evals, cond = _solve_mtm(kept.T @ kept, reference_ray,
                                            cond_threshold)
                count = int(np.count_nonzero(keep))
    return NormalEstimate(n, evals, float(cond), count)


def solve_normals_batched(mtms, reference_rays, cond_threshold=DEFAULT_COND_THRESHOLD):
    """Vectorized solve for stacks of 3x3 constraint matrices.

    Returns (normals (..., 3), condition_ratios, ok_mask, eigenvalues);
    entries that are ill-conditioned have ok=False and an unspecified
    normal.  Used by the evaluation harness for large trial ensembles.
    """
    mtms = np.asarray(mtms, dtype=float)
    evals, evecs = np.linalg.eigh(mtms)
    lam1, lam2, lam3 = evals[..., 0], evals[..., 1], evals[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lam3 > 0, lam2 / np.where(lam3 > 0, lam3, 1.0), 0.0)
    ok = (lam3 > 0) & (cond >= cond_threshold) & (lam2 - lam1 > TIE_TOL * lam3)
    normals = evecs[..., :, 0]
    refs = np.asarray(reference_rays, dtype=float)
    flip = np.sum(normals * refs, axis=-1) > 0
    normals = np.where(flip[..., None], -normals, normals)
    return normals, cond, ok, evals


def build_single_view_system(aolp, pixels, intrinsics, model):
    """One constraint row per unmasked pixel of a single phase-angle map.

    ``pixels`` are (N, 2) sub-pixel positions; values are sampled with
    mod-pi-aware bilinear interpolation and pixels whose neighborhood is
    masked are dropped.  Raises NoValidPixels when nothing survives.
    """
    from .polarization import sample_phase

    px = np.atleast_2d(np.asarray(pixels, dtype=float))
    values, ok = sample_phase(aolp, px)
    if not np.any(ok):
        raise NoValidPixels("all requested pixels are masked")
    px = px[ok]
    values = values[ok]
    rays = pixel_rays(intrinsics, px)
    if model is ModelKind.PPA:
        w = -(rays[:, 1] * np.cos(values) + rays[:, 0] * np.sin(values)) / rays[:, 2]
    else:
        w = np.zeros(len(values))
    rows = np.stack([np.sin(values), np.cos(values), w], axis=-1)
    return ConstraintSystem.from_rows(rows, model, frame="camera", views=1)


def build_multi_view_system(observations, model):
    """World-frame constraint system for one surface point seen in K views.

    ``observations`` is a sequence of (aolp_value, pixel, intrinsics, pose)
    tuples; each contributes the row m^T R of its view.  Requires K >= 2.
    """
    if len(observations) < 2:
        raise TooFewViews(f"need at least 2 views, got {len(observations)}")
    rows = []
    for k, (value, pixel, intrinsics, pose) in enumerate(observations):
        ray = pixel_rays(intrinsics, np.asarray(pixel, dtype=float))[0]
        if model is ModelKind.PPA:
            m = ppa_constraint_row(float(value), ray, view_index=k,
                                   pixel=tuple(np.asarray(pixel, dtype=float))).m
        else:
            m = opa_constraint_row(float(value), view_index=k,
                                   pixel=tuple(np.asarray(pixel, dtype=float))).m
        rows.append(m @ pose.rotation)
    return ConstraintSystem.from_rows(
        np.asarray(rows), model, frame="world", views=len(observations))


def estimate_plane_normal_map(aolp, region, intrinsics, model=ModelKind.PPA,
                              cond_threshold=DEFAULT_COND_THRESHOLD):
    """Normal of a planar region from all its unmasked phase angles.

    Accumulates M^T M directly (O(1) memory in the pixel count) and
    solves with the region's mean viewing ray as the visibility
    reference.
    """
    from .geometry import ray_grid

    use = np.asarray(region, dtype=bool) & aolp.mask
    count = int(np.count_nonzero(use))
    if count == 0:
        raise NoValidPixels("region contains no valid pixels")
    if count < 2:
        raise EmptySystem("region must contain at least 2 valid pixels")
    vx, vy, vz = ray_grid(intrinsics)
    phi = aolp.values[use]
    rx, ry, rz = vx[use], vy[use], vz[use]
    mtm = kernels.constraint_mtm(phi, rx, ry, rz, model is ModelKind.PPA)
    system = ConstraintSystem.from_accumulated(mtm, count, model, frame="camera")
    reference = unit(np.array([rx.mean(), ry.mean(), rz.mean()]))
    return solve_normal(system, reference, cond_threshold)
