import numpy as np
import pytest

from rumsim.dataio import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def make_binary_dataset(n=50, seed=0, j=2):
    """Small dataset with generic attribute columns x and z."""
    gen = np.random.default_rng(seed)
    x = gen.normal(size=(n, j))
    z = gen.uniform(-1, 1, size=(n, j))
    y = gen.integers(0, j, size=n)
    return Dataset(alt_vars={"x": x, "z": z}, shared_vars={"age": gen.uniform(20, 60, size=n)},
                   y=y, alt_names=tuple(f"alt{i}" for i in range(j)))
