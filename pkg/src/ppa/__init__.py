"""Perspective phase angle (PPA) model for polarimetric 3D reconstruction.

The package covers polarization-state extraction from four-orientation
images, the perspective and orthographic phase-angle forward models with
their linear normal constraints, single- and multi-view least-squares
normal estimation, contour tracing, and a synthetic polarization-camera
oracle with a CLI reproducing the model comparisons.
"""

from . import kernels
from .angles import canonical_phase, phase_distance, signed_phase_error
from .contours import Contour3D, plane_rmse, trace_iso_depth, trace_ppa
from .estimation import (
    ConstraintSystem,
    NormalEstimate,
    build_multi_view_system,
    build_single_view_system,
    estimate_plane_normal_map,
    solve_normal,
)
from .geometry import (
    CameraIntrinsics,
    PlaneModel,
    Pose,
    pixel_rays,
    pixel_to_ray,
    project,
    ray_grid,
    rotation_exp,
    transform_normal,
)
from .models import (
    ConstraintRow,
    ModelKind,
    classify_equivalence,
    normal_from_angles,
    opa_constraint_row,
    opa_phase,
    ppa_constraint_row,
    ppa_phase,
    ppa_phase_signed,
)
from .polarization import (
    PolarizationFrame,
    ScalarMap,
    StokesImage,
    compute_stokes,
    decode_mosaic,
    extract_state,
    gaussian_blur,
    sample_phase,
    synthesize_intensities,
)
from .synth import (
    Board,
    SceneNoise,
    SceneSpec,
    default_board,
    make_orbit_pose,
    render_view,
    sample_poses,
    specular_dolp,
)

__version__ = "0.1.0"
