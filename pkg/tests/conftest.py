import numpy as np
import pytest

from payofflab import GameParams, MemoryOneStrategy
from payofflab.rng import stream


@pytest.fixture
def g_high():
    """IPD with S+T > 2R (alternation beats mutual cooperation)."""
    return GameParams(2, -1, 7, 0)


@pytest.fixture
def g_mid():
    """IPD with 2P < S+T < 2R (the classical setting)."""
    return GameParams(3, 0, 5, 1)


@pytest.fixture
def g_low():
    """IPD with S+T < 2P."""
    return GameParams(4, 0, 5, 3)


@pytest.fixture
def g_unit():
    """Rescaled-style IPD used for the feasible-region gallery."""
    return GameParams(1, -1, 2, 0)


def interior_strategy(gen, lo=0.01, hi=0.99):
    return MemoryOneStrategy.from_array(gen.uniform(lo, hi, 4))


def random_game(gen, lo=-5.0, hi=5.0):
    return GameParams(*gen.uniform(lo, hi, 4))


@pytest.fixture
def gen():
    return stream(20240817)
