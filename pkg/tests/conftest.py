import numpy as np
import pytest

from jnnts.model import Dataset
from jnnts.simulation import grid_coords


def random_connectivity(rng, n, p):
    Z = rng.standard_normal((n, p, p))
    Z = np.triu(Z, 1)
    return Z + Z.transpose(0, 2, 1)


def make_dataset(rng, n=40, p=4, q=1, coords=True):
    X = rng.standard_normal((n, p))
    Z = random_connectivity(rng, n, p)
    W = np.column_stack([np.ones(n), rng.standard_normal((n, q - 1))])
    y = rng.standard_normal(n)
    return Dataset.from_arrays(y, X, Z, W=W, coords=grid_coords(p) if coords else None)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_dataset(rng):
    return make_dataset(rng)
