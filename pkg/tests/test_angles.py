import numpy as np
import pytest

from ppa.angles import canonical_phase, phase_distance, signed_phase_error, wrap_angle


def test_canonical_range():
    x = np.linspace(-10, 10, 2001)
    c = canonical_phase(x)
    assert np.all(c >= 0) and np.all(c < np.pi)
    # same orientation mod pi
    assert np.allclose(np.cos(2 * c), np.cos(2 * x), atol=1e-12)
    assert np.allclose(np.sin(2 * c), np.sin(2 * x), atol=1e-12)


def test_phase_distance_values():
    assert phase_distance(0.0, 0.0) == 0.0
    assert phase_distance(0.0, np.pi) == pytest.approx(0.0, abs=1e-12)
    assert phase_distance(0.1, np.pi - 0.1) == pytest.approx(0.2, abs=1e-12)
    assert phase_distance(0.0, np.pi / 2) == pytest.approx(np.pi / 2)
    # symmetry
    assert phase_distance(1.3, 0.2) == phase_distance(0.2, 1.3)


def test_signed_phase_error_range_and_sign():
    a = np.linspace(0, np.pi, 101)
    e = signed_phase_error(a, 0.0)
    assert np.all(e > -np.pi / 2) and np.all(e <= np.pi / 2)
    assert signed_phase_error(0.1, 0.0) == pytest.approx(0.1)
    assert signed_phase_error(0.0, 0.1) == pytest.approx(-0.1)
    # wraps across pi
    assert signed_phase_error(np.pi - 0.05, 0.05) == pytest.approx(-0.1, abs=1e-12)


def test_wrap_angle():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
