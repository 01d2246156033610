import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kerrdg import Discretization, FieldState, build_mesh

settings.register_profile("kerrdg", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kerrdg")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(disc, rng, scale=1.0):
    return FieldState(*(scale * rng.standard_normal(disc.coeff_shape) for _ in range(3)))


def unit_disc(n, k, ny=None):
    return Discretization.build(build_mesh(0.0, 1.0, 0.0, 1.0, n, ny or n), k)
