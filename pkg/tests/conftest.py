import numpy as np
import pytest

from src.tools.manifold import Sphere, Stiefel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sphere():
    return Sphere(3)


@pytest.fixture
def stiefel():
    return Stiefel(4, 2)


@pytest.fixture
def dense_s2():
    return np.array([
        [1.30, 0.20, -0.10],
        [0.20, 0.90, 0.15],
        [-0.10, 0.15, 1.10],
    ])


def make_psd(n, rank, rng):
    # random eigenvectors, retained eigenvalues in [0.25, 4]
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    values = np.zeros(n)
    values[:rank] = rng.uniform(0.5, 2.0, size=rank) ** 2
    return (q * values) @ q.T


def make_pd(n, rng):
    b = rng.standard_normal((n, n))
    return b @ b.T / n + 0.5 * np.eye(n)
