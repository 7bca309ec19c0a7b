import numpy as np
import pytest
from hypothesis import settings

from adrk.tableau import random_tableau

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_valid_tableaux(count, q_max=8, seed=0):
    g = np.random.default_rng(seed)
    return [random_tableau(int(g.integers(1, q_max + 1)), g) for _ in range(count)]
