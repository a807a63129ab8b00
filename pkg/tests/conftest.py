import numpy as np
import pytest

from prefixkv import crashpoints


@pytest.fixture(autouse=True)
def _disarm_crashpoints():
    crashpoints.disarm_all()
    yield
    crashpoints.disarm_all()


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def random_tokens(rng, n):
    return rng.integers(0, 2**32, size=n, dtype=np.uint32)
