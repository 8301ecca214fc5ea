import numpy as np
import pytest

from stateredist.tensor import SystemLayout, random_pure_state

ABCR = SystemLayout([("A", 2), ("B", 2), ("C", 2), ("R", 8)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def abcr_states():
    gen = np.random.default_rng(11)
    return [random_pure_state(ABCR, gen) for _ in range(4)]
