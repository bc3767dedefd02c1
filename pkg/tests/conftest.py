import numpy as np
import pytest

from affinebody.tensors import Metric


def random_metric(n, rng, spread=0.3):
    a = spread * rng.standard_normal((n, n))
    return Metric(np.eye(n) + a @ a.T)


def random_phi(n, rng, scale=0.4, det_floor=0.3):
    while True:
        p = np.eye(n) + scale * rng.standard_normal((n, n))
        if np.linalg.det(p) > det_floor:
            return p


def random_spd(n, rng, spread=0.3):
    a = spread * rng.standard_normal((n, n))
    return np.eye(n) + a @ a.T


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
