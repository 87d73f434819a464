import numpy as np
import pytest

from steinitz_lab.hilbert import LinearMap, WeightedHilbert
from steinitz_lab.series import ScalarStream, make_series


def random_space(rng, d):
    return WeightedHilbert(rng.uniform(0.2, 3.0, d))


def random_map(rng, m, n, weighted=True):
    M = rng.standard_normal((m, n))
    if not weighted:
        return LinearMap.euclidean(M)
    return LinearMap(M, random_space(rng, n), random_space(rng, m))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def r2_series():
    return make_series(
        2,
        ([1.0, 0.0], ScalarStream("alternating_power", alpha=1.0)),
        ([0.0, 1.0], ScalarStream("power", alpha=2.0)),
    )


@pytest.fixture
def harmonic_alt():
    return ScalarStream("alternating_power", alpha=1.0)
