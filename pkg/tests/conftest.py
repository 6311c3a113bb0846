import warnings

import pytest

from mobilemedium.params import ModelParams


@pytest.fixture
def regime2():
    return ModelParams(d=3, p=2.0, theta=1.0, sigma=1.0)


@pytest.fixture
def regime1_line():
    return ModelParams(d=1, p=0.75, theta=1.0, sigma=1.0)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
