import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tvrecover.config import RecoveryConfig
from tvrecover.operators import gaussian_op

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


def square_images(min_side: int = 2, max_side: int = 8):
    return st.integers(min_side, max_side).flatmap(lambda n: arrays(np.float64, (n, n), elements=finite))


def dyadic_images(max_level: int = 3):
    return st.integers(0, max_level).flatmap(lambda n: arrays(np.float64, (2 ** n, 2 ** n), elements=finite))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_image(rng):
    return rng.standard_normal((8, 8))


@pytest.fixture
def gaussian_8x8():
    return gaussian_op(40, 8, 8, seed=7)


@pytest.fixture
def settings(tmp_path):
    return RecoveryConfig(output_root=tmp_path, log_level="DEBUG", default_n=16, seed=0)
