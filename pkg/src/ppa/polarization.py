"""Polarization-state extraction from four-orientation intensity images.

A division-of-focal-plane camera measures the intensity behind linear
polarizers at 0, 45, 90 and 135 degrees.  The transmitted intensity of
partially linearly polarized light follows

    I(alpha) = I_avg * (1 + rho * cos(2 * (alpha - phi)))

with average intensity I_avg, degree of linear polarization rho and
phase angle (AoLP) phi.  The linear Stokes components recover the state:
s0 = I(0) + I(90), s1 = I(0) - I(90), s2 = I(45) - I(135).
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .angles import canonical_phase
from .errors import PolarimetryError
from .geometry import CameraIntrinsics

POLARIZER_ANGLES = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)


@dataclass(frozen=True)
class ScalarMap:
    """Per-pixel float field with a validity mask."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.mask, dtype=bool)
        if v.shape != m.shape or v.ndim != 2:
            raise PolarimetryError("values and mask must be 2D arrays of equal shape")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)

    @property
    def shape(self):
        return self.values.shape

    def valid_fraction(self):
        return float(np.count_nonzero(self.mask)) / self.mask.size


@dataclass(frozen=True)
class PolarizationFrame:
    """Co-registered intensity images behind the four polarizer orientations."""

    i0: np.ndarray
    i45: np.ndarray
    i90: np.ndarray
    i135: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        imgs = [np.asarray(x, dtype=float) for x in (self.i0, self.i45, self.i90, self.i135)]
        shape = imgs[0].shape
        if any(im.shape != shape for im in imgs):
            raise PolarimetryError("the four intensity images must share dimensions")
        if shape != (self.intrinsics.height, self.intrinsics.width):
            raise PolarimetryError("image dimensions do not match the intrinsics")
        if any(np.any(im < 0) for im in imgs):
            raise PolarimetryError("intensities must be non-negative")
        for name, im in zip(("i0", "i45", "i90", "i135"), imgs):
            object.__setattr__(self, name, im)

    def channels(self):
        return self.i0, self.i45, self.i90, self.i135


@dataclass(frozen=True)
class StokesImage:
    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray


_PATTERN_NAMES = {"0": 0, "45": 45, "90": 90, "135": 135}


def decode_mosaic(raw, pattern, intrinsics):
    """Split a 2x2 micro-polarizer mosaic into four half-resolution images.

    ``pattern`` is the 2x2 orientation layout, e.g. [["0","45"],["135","90"]]
    (a permutation of the four orientations, as strings or integers).
    Plain subsampling, no interpolation; the returned frame carries the
    halved intrinsics.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] % 2 or raw.shape[1] % 2:
        raise PolarimetryError("mosaic image must be 2D with even dimensions")
    cells = {}
    for r in range(2):
        for c in range(2):
            key = int(_PATTERN_NAMES.get(str(pattern[r][c]), -1))
            cells[key] = raw[r::2, c::2]
    if sorted(cells) != [0, 45, 90, 135]:
        raise PolarimetryError("pattern must be a permutation of {0, 45, 90, 135}")
    half = CameraIntrinsics(
        fx=intrinsics.fx / 2.0,
        fy=intrinsics.fy / 2.0,
        cx=intrinsics.cx / 2.0,
        cy=intrinsics.cy / 2.0,
        width=intrinsics.width // 2,
        height=intrinsics.height // 2,
    )
    return PolarizationFrame(cells[0], cells[45], cells[90], cells[135], half)


def compute_stokes(frame):
    """Linear Stokes components of a frame: s0 = I0+I90, s1 = I0-I90, s2 = I45-I135."""
    return StokesImage(
        s0=frame.i0 + frame.i90,
        s1=frame.i0 - frame.i90,
        s2=frame.i45 - frame.i135,
    )


def extract_state(stokes, dolp_threshold=0.1):
    """Polarization state maps (aolp, dolp, iavg) from Stokes components.

    I_avg = s0/2, rho = sqrt(s1^2+s2^2)/s0, phi = arctan2(s2, s1)/2
    canonicalized to [0, pi).  Pixels with s0 <= 0 or rho <= threshold
    are masked instead of raising; their aolp value is meaningless but
    finite.
    """
    if not 0.0 <= dolp_threshold < 1.0:
        raise PolarimetryError("dolp threshold must lie in [0, 1)")
    s0, s1, s2 = stokes.s0, stokes.s1, stokes.s2
    iavg = s0 / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(s0 > 0, np.hypot(s1, s2) / np.where(s0 > 0, s0, 1.0), 0.0)
    phi = canonical_phase(0.5 * np.arctan2(s2, s1))
    valid = (s0 > 0) & (rho > dolp_threshold)
    return ScalarMap(phi, valid), ScalarMap(rho, valid), ScalarMap(iavg, s0 > 0)


def synthesize_intensities(iavg, dolp, aolp, angles=POLARIZER_ANGLES):
    """Forward sinusoid: intensities behind each polarizer orientation.

    Inputs broadcast; returns a tuple with one array (or scalar) per
    polarizer angle.
    """
    iavg = np.asarray(iavg, dtype=float)
    dolp = np.asarray(dolp, dtype=float)
    aolp = np.asarray(aolp, dtype=float)
    return tuple(
        iavg * (1.0 + dolp * np.cos(2.0 * (alpha - aolp))) for alpha in angles
    )


def sample_phase(scalar_map, pixels):
    """Mod-pi-aware bilinear sampling of a phase map at sub-pixel positions.

    Interpolates (cos 2 phi, sin 2 phi) and halves the angle, so values
    straddling the 0/pi wrap do not average to garbage.  Returns
    (values (N,), ok (N,) bool); a sample is ok only when its four
    neighbors are in bounds and unmasked.
    """
    px = np.atleast_2d(np.asarray(pixels, dtype=float))
    h, w = scalar_map.shape
    u, v = px[:, 0], px[:, 1]
    inside = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    i = np.clip(np.floor(u).astype(int), 0, w - 2)
    j = np.clip(np.floor(v).astype(int), 0, h - 2)
    fu = np.where(inside, u - i, 0.0)
    fv = np.where(inside, v - j, 0.0)
    m = scalar_map.mask
    ok = inside & m[j, i] & m[j, i + 1] & m[j + 1, i] & m[j + 1, i + 1]
    c2 = np.cos(2.0 * scalar_map.values)
    s2 = np.sin(2.0 * scalar_map.values)
    w00 = (1 - fu) * (1 - fv)
    w10 = fu * (1 - fv)
    w01 = (1 - fu) * fv
    w11 = fu * fv

    def lerp(a):
        return (w00 * a[j, i] + w10 * a[j, i + 1]
                + w01 * a[j + 1, i] + w11 * a[j + 1, i + 1])

    values = canonical_phase(0.5 * np.arctan2(lerp(s2), lerp(c2)))
    return values, ok


def gaussian_blur(obj, sigma):
    """Separable Gaussian blur with kernel radius ceil(3 sigma), replicated edges.

    Accepts a plain 2D array, a ScalarMap (values blurred, mask kept) or a
    PolarizationFrame (all four channels blurred).  sigma = 0 is the
    identity.
    """
    if sigma < 0:
        raise PolarimetryError("blur sigma must be non-negative")
    if isinstance(obj, PolarizationFrame):
        return PolarizationFrame(
            *(gaussian_blur(ch, sigma) for ch in obj.channels()),
            intrinsics=obj.intrinsics,
        )
    if isinstance(obj, ScalarMap):
        return ScalarMap(gaussian_blur(obj.values, sigma), obj.mask)
    img = np.asarray(obj, dtype=float)
    if sigma == 0:
        return img.copy()
    radius = int(np.ceil(3.0 * sigma))
    return ndimage.gaussian_filter(img, sigma=sigma, mode="nearest", radius=radius)
