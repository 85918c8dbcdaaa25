import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def central_diff(fn, x, h=1e-6):
    """Scalar central finite difference, the oracle for every gradient test."""
    return (fn(x + h) - fn(x - h)) / (2.0 * h)
