import numpy as np
import pytest


def random_unit(rng, size=None):
    v = rng.normal(size=(size, 3) if size else 3)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_ray(rng):
    """Unit viewing ray with v_z > 0 (in front of the camera)."""
    v = random_unit(rng)
    if v[2] < 0:
        v = -v
    if v[2] < 1e-3:  # keep away from the image plane
        return random_ray(rng)
    return v


def random_facing_pair(rng, min_sep=1e-2):
    """(n, v) with unit norm, v_z > 0, n facing the camera (n.v < 0),
    and the pair away from the parallel degeneracy."""
    while True:
        v = random_ray(rng)
        n = random_unit(rng)
        if n @ v > 0:
            n = -n
        if abs(n @ v) > min_sep and np.linalg.norm(np.cross(n, v)) > min_sep:
            return n, v


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
