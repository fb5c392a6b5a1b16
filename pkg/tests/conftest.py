import numpy as np
import pytest


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_psd(rng, n, scale=1.0):
    a = crandn(rng, n, n)
    return scale * (a @ a.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
