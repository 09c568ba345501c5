import numpy as np
import pytest

from probkin.demos import binomial_config, noncommutativity_config


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def noncommutative():
    """Four intervals of [0, 1] under Lebesgue measure, symbol i picking out interval i."""
    return noncommutativity_config()


@pytest.fixture
def binomial():
    return binomial_config()
