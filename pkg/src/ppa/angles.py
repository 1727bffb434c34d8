"""Mod-pi phase angle arithmetic.

Phase angles (AoLP) are orientations, defined modulo pi.  The canonical
representative used throughout the package lies in [0, pi).
"""

import numpy as np


def canonical_phase(phi):
    """Reduce an angle (scalar or array, radians) to the canonical [0, pi) range."""
    return np.mod(phi, np.pi)


def phase_distance(a, b):
    """Unsigned mod-pi distance between two phase angles, in [0, pi/2]."""
    d = np.mod(np.abs(np.asarray(a, dtype=float) - b), np.pi)
    return np.minimum(d, np.pi - d)


def signed_phase_error(a, b):
    """Signed mod-pi difference a - b mapped to (-pi/2, pi/2].

    This is the error convention under which a mean phase bias is well
    defined.
    """
    d = np.mod(np.asarray(a, dtype=float) - b, np.pi)  # [0, pi)
    return np.where(d > np.pi / 2, d - np.pi, d)


def wrap_angle(a):
    """Wrap a full angle to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)
