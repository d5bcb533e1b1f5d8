import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_orthonormal(rng, d, q):
    Q, _ = np.linalg.qr(rng.normal(size=(d, q)))
    return Q
