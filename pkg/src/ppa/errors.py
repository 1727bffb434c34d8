"""Exception types raised on contract violations and geometric degeneracies."""


class PolarimetryError(ValueError):
    """Base class for all errors raised by this package."""


class DegenerateNormal(PolarimetryError):
    """Orthographic phase angle undefined: normal parallel to the optical axis."""


class DegenerateRayNormal(PolarimetryError):
    """Perspective phase angle undefined: viewing ray parallel to the normal."""


class RayBehindCamera(PolarimetryError):
    """Viewing ray does not point in front of the camera (v_z <= 0)."""


class DegenerateAxis(PolarimetryError):
    """Rotation axis for the normal parameterization is undefined."""


class EmptySystem(PolarimetryError):
    """Constraint system has fewer than two rows."""


class TooFewViews(PolarimetryError):
    """Multi-view system needs at least two views."""


class NoValidPixels(PolarimetryError):
    """All requested pixels are masked out."""


class IllConditioned(PolarimetryError):
    """Constraint system does not determine a unique normal direction."""

    def __init__(self, message, eigenvalues=None, condition_ratio=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.condition_ratio = condition_ratio


class SeedMasked(PolarimetryError):
    """Contour seed pixel falls on a masked map location."""


class SeedOutOfBounds(PolarimetryError):
    """Contour seed pixel lies outside the image."""


class RayParallelToPlane(PolarimetryError):
    """Contour propagation ray is (nearly) parallel to the local plane."""


class EmptyContour(PolarimetryError):
    """Contour has no points."""


class PlaneBehindCamera(PolarimetryError):
    """No pixel of the view intersects the scene plane."""
