import numpy as np
import pytest

from rbfxfer import PointSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cloud(rng, n, lo=0.0, hi=1.0):
    return PointSet(rng.uniform(lo, hi, size=(n, 3)))


def random_rotations(rng, n):
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a, b, c, d = q.T
    return np.stack(
        [
            np.stack([a*a + b*b - c*c - d*d, 2*(b*c - a*d), 2*(b*d + a*c)], -1),
            np.stack([2*(b*c + a*d), a*a - b*b + c*c - d*d, 2*(c*d - a*b)], -1),
            np.stack([2*(b*d - a*c), 2*(c*d + a*b), a*a - b*b - c*c + d*d], -1),
        ],
        axis=1,
    )


def random_positive_tensors(rng, n):
    F = rng.normal(size=(n, 3, 3))
    flip = np.linalg.det(F) < 0
    F[flip, :, 0] *= -1
    return F
