import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def square():
    from roundoff.geometry import preset

    return preset("square")


@pytest.fixture(scope="session")
def lshape():
    from roundoff.geometry import preset

    return preset("lshape")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
