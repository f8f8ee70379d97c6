import numpy as np
import pytest

from dicebench.grid import HardSegmentation, MarginalMap


@pytest.fixture
def rng():
    return np.random.default_rng(20221016)


def marg(*rows):
    return MarginalMap.from_array(np.array(rows, dtype=float).squeeze())


def hard(*rows):
    return HardSegmentation.from_array(np.array(rows, dtype=float).squeeze())
