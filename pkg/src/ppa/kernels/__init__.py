"""Hot-kernel backend selection.

Two interchangeable implementations exist: a compiled Cython extension
(``ppa.kernels._native``) and a pure-numpy fallback
(``ppa.kernels.numpy_impl``).  The extension is preferred when it
imported successfully; set ``PPA_BACKEND=numpy`` (or ``native``) to pin
one explicitly.  ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

import numpy as np

from . import numpy_impl

_IMPLS = {"numpy": numpy_impl}

try:
    from . import _native

    _IMPLS["native"] = _native
except ImportError:  # extension not built; numpy fallback stays active
    _native = None

_requested = os.environ.get("PPA_BACKEND", "auto").strip().lower()
if _requested in ("", "auto"):
    _active = _IMPLS.get("native", numpy_impl)
elif _requested in _IMPLS:
    _active = _IMPLS[_requested]
else:
    raise ImportError(
        f"PPA_BACKEND={_requested!r} not available; choices: {sorted(_IMPLS)}"
    )


def available():
    """Names of the usable backends."""
    return sorted(_IMPLS)


def active_name():
    return _active.NAME


def use(name):
    """Switch the active backend ('numpy' or 'native'); returns the old name."""
    global _active
    if name not in _IMPLS:
        raise KeyError(f"backend {name!r} not available; choices: {sorted(_IMPLS)}")
    old = _active.NAME
    _active = _IMPLS[name]
    return old


def get(name):
    return _IMPLS[name]


def ppa_phase_map(normal, vx, vy, vz):
    """Canonical perspective phase of one normal over arrays of rays."""
    n = np.asarray(normal, dtype=float)
    return _active.ppa_phase_const_normal(
        float(n[0]), float(n[1]), float(n[2]),
        np.ascontiguousarray(vx, dtype=np.float64),
        np.ascontiguousarray(vy, dtype=np.float64),
        np.ascontiguousarray(vz, dtype=np.float64),
    )


def constraint_mtm(phi, vx, vy, vz, ppa):
    """Unit-normalized constraint rows accumulated into M^T M (3, 3)."""
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    return _active.constraint_mtm(
        phi,
        np.ascontiguousarray(vx, dtype=np.float64),
        np.ascontiguousarray(vy, dtype=np.float64),
        np.ascontiguousarray(vz, dtype=np.float64),
        bool(ppa),
    )


def trace_track(cos2, sin2, valid, u0, v0, du0, dv0, step, max_steps):
    """Serial direction-field tracing; see ``numpy_impl.trace_track``."""
    return _active.trace_track(
        np.ascontiguousarray(cos2, dtype=np.float64),
        np.ascontiguousarray(sin2, dtype=np.float64),
        np.ascontiguousarray(valid, dtype=np.uint8),
        float(u0), float(v0), float(du0), float(dv0),
        float(step), int(max_steps),
    )
