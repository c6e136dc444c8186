import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from grnswitch.model import OSCILLATION_PARAMS

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def osc():
    return OSCILLATION_PARAMS


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

