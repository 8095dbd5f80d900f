import numpy as np
import pytest

from diqkdsps.photonic import Behavior, PhysicalParams, default_overlaps


def behavior_from_correlators(e, marginals=None):
    """Behavior with correlators e[x][y] and unbiased (or given) marginals."""
    p = np.zeros((2, 2, 2, 3))
    for a in range(2):
        for b in range(2):
            for x in range(2):
                for y in range(3):
                    p[a, b, x, y] = (1.0 + (-1) ** (a + b) * e[x][y]) / 4.0
    return Behavior(p=p)


@pytest.fixture
def tsirelson_behavior():
    """Maximally entangled state with A0=Z, A1=X, B0/B1 at 45 degrees and B2=Z."""
    r = 1.0 / np.sqrt(2.0)
    return behavior_from_correlators([[r, r, 1.0], [r, -r, 0.0]])


@pytest.fixture
def uniform_behavior():
    return behavior_from_correlators(np.zeros((2, 3)))


@pytest.fixture
def ideal_params():
    return PhysicalParams(eta1=1.0, eta2=1.0, eta_t=1.0, big_t=1e-3, small_t=0.5)


@pytest.fixture
def ideal_overlaps(ideal_params):
    return default_overlaps(ideal_params)
