import numpy as np
import pytest

from cmvlab.rng import RngStream


@pytest.fixture
def stream():
    return RngStream(20240817)


def circle_distance(a, b):
    """Max circle distance between two sorted angle multisets."""
    a = np.asarray(a)
    b = np.asarray(b)
    assert a.size == b.size
    best = np.inf
    for s in range(a.size):
        d = np.abs(a - np.roll(b, s)) % (2 * np.pi)
        d = np.minimum(d, 2 * np.pi - d)
        best = min(best, d.max())
    return best
