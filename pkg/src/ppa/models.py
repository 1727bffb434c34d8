"""Phase-angle forward models and linear normal constraints.

Two models relate a surface normal n to the polarization phase angle
measured at a pixel:

* OPA (orthographic phase angle): the phase equals the image-plane
  azimuth of the normal, independent of the pixel.
* PPA (perspective phase angle): the phase is the direction of the
  intersection of the image plane with the plane of incidence (PoI)
  spanned by the viewing ray v and the normal n.

Both yield a linear constraint m . n = 0 on the normal; the PPA row has
a nonzero third coefficient, which is what makes single-view normal
estimation possible.

All phase angles returned here are canonicalized to [0, pi).
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .angles import canonical_phase, phase_distance
from .errors import (
    DegenerateAxis,
    DegenerateNormal,
    DegenerateRayNormal,
    PolarimetryError,
    RayBehindCamera,
)
from .geometry import require_unit, rotation_exp

DEGENERACY_TOL = 1e-12
EQUIVALENCE_TOL = 1e-9


class ModelKind(enum.Enum):
    OPA = "opa"
    PPA = "ppa"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ConstraintRow:
    """One linear constraint m . n = 0 with provenance."""

    m: np.ndarray
    model: ModelKind
    view_index: int = 0
    pixel: tuple = field(default=None)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(3)
        if not np.all(np.isfinite(m)) or np.linalg.norm(m) == 0.0:
            raise PolarimetryError("constraint row must be finite and nonzero")
        object.__setattr__(self, "m", m)


def opa_phase(n):
    """Orthographic phase angle -atan2(n_y, n_x), canonical [0, pi)."""
    n = require_unit(n, "normal")
    if np.hypot(n[0], n[1]) < DEGENERACY_TOL:
        raise DegenerateNormal("normal parallel to the optical axis: OPA phase undefined")
    return float(canonical_phase(-np.arctan2(n[1], n[0])))


def ppa_phase_signed(n, v):
    """Perspective phase angle with its full 2pi sign information.

    The returned angle phi in (-pi, pi] is such that the in-image-plane
    vector z x (v x n) points exactly along d = [cos phi, -sin phi, 0].
    ``ppa_phase`` is this value reduced mod pi; the signed form is what
    makes the normal parameterization round trip exactly.
    """
    n = require_unit(n, "normal")
    v = require_unit(v, "ray")
    if v[2] <= 0:
        raise RayBehindCamera("viewing ray must have v_z > 0")
    cross = np.cross(v, n)
    if np.linalg.norm(cross) < DEGENERACY_TOL:
        raise DegenerateRayNormal("viewing ray parallel to normal: PoI undefined")
    ex = -v[2] * n[0] + v[0] * n[2]
    ey = -v[2] * n[1] + v[1] * n[2]
    return float(-np.arctan2(ey, ex))


def ppa_phase(n, v):
    """Perspective phase angle -atan2(-v_z n_y + v_y n_z, -v_z n_x + v_x n_z),
    canonical [0, pi)."""
    return float(canonical_phase(ppa_phase_signed(n, v)))


def opa_constraint_row(phi, view_index=0, pixel=None):
    """OPA constraint coefficients m = [sin phi, cos phi, 0]."""
    return ConstraintRow(
        np.array([np.sin(phi), np.cos(phi), 0.0]),
        ModelKind.OPA,
        view_index,
        pixel,
    )


def ppa_constraint_row(phi, v, view_index=0, pixel=None):
    """PPA constraint coefficients
    m = [sin phi, cos phi, -(v_y cos phi + v_x sin phi) / v_z]."""
    v = require_unit(v, "ray")
    if v[2] <= 0:
        raise RayBehindCamera("viewing ray must have v_z > 0")
    s, c = np.sin(phi), np.cos(phi)
    return ConstraintRow(
        np.array([s, c, -(v[1] * c + v[0] * s) / v[2]]),
        ModelKind.PPA,
        view_index,
        pixel,
    )


def normal_from_angles(model, phi, theta, v):
    """Normal parameterized by phase angle and viewing angle.

    Rotates -v by theta (the angle between -v and the normal) about the
    model's axis.  For PPA the axis is the PoI normal v x d with
    d = [cos phi, -sin phi, 0]; for OPA the axis depends on phi alone,
    z x d = [sin phi, cos phi, 0].

    phi is interpreted with its full 2pi period: feeding the signed phase
    from :func:`ppa_phase_signed` reproduces the original normal exactly,
    while the canonical mod-pi phase determines the normal only up to the
    in-PoI mirror about -v (both candidates face the camera and share the
    forward phase).
    """
    v = require_unit(v, "ray")
    if not 0.0 <= theta < np.pi / 2:
        raise PolarimetryError("viewing angle theta must lie in [0, pi/2)")
    d = np.array([np.cos(phi), -np.sin(phi), 0.0])
    if model is ModelKind.PPA:
        axis = np.cross(v, d)
    else:
        axis = np.array([np.sin(phi), np.cos(phi), 0.0])
    norm = np.linalg.norm(axis)
    if norm < DEGENERACY_TOL:
        raise DegenerateAxis("rotation axis undefined: d parallel to v")
    return rotation_exp(axis / norm, theta) @ (-v)


def classify_equivalence(n, v, tol=EQUIVALENCE_TOL):
    """Which of the four OPA/PPA equivalence cases hold for (n, v).

    Cases: (1) ray parallel to the optical axis; (2) the image-plane
    azimuths of v, of the PPA direction d, and of n all parallel (PoI
    perpendicular to the image plane); (3) normal (anti)parallel to the
    optical axis in the limit sense |n_z| -> 1; (4) normal perpendicular
    to the optical axis (n_z = 0).  Returns a possibly empty set of case
    numbers.
    """
    n = require_unit(n, "normal")
    v = require_unit(v, "ray")
    cases = set()
    if np.hypot(v[0], v[1]) <= tol:
        cases.add(1)
    else:
        try:
            phi_p = ppa_phase(n, v)
        except PolarimetryError:
            phi_p = None
        if phi_p is not None:
            pairs = [
                (v[:2], np.array([np.cos(phi_p), -np.sin(phi_p)])),
                (v[:2], n[:2]),
                (np.array([np.cos(phi_p), -np.sin(phi_p)]), n[:2]),
            ]
            if all(_parallel_2d(a, b, tol) for a, b in pairs):
                cases.add(2)
    if abs(n[2]) > 1.0 - tol:
        cases.add(3)
    if abs(n[2]) <= tol:
        cases.add(4)
    return cases


def _parallel_2d(a, b, tol):
    na, nb = np.hypot(a[0], a[1]), np.hypot(b[0], b[1])
    if na <= tol or nb <= tol:
        return True  # vanishing azimuth: direction unconstrained
    return abs(a[0] * b[1] - a[1] * b[0]) / (na * nb) <= tol


def models_agree(n, v, tol=EQUIVALENCE_TOL):
    """True when the two models predict the same phase for (n, v)."""
    return bool(phase_distance(ppa_phase(n, v), opa_phase(n)) < tol)
