import numpy as np
import pytest

from msv import Baseline, InputTensor


@pytest.fixture
def black():
    return Baseline.black()


@pytest.fixture
def flat4():
    return InputTensor(np.array([1.0, 2.0, 3.0, 4.0]))


@pytest.fixture
def image_8x8():
    rng = np.random.default_rng(0)
    return InputTensor(rng.random((8, 8, 3)))
