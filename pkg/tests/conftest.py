import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from gaf.grid import GridDomain  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIOS = os.path.join(ROOT, "scenarios")


@pytest.fixture
def square64():
    return GridDomain(-1.0, 1.0, -1.0, 1.0, 64, 64)


@pytest.fixture
def strip129():
    """[-1,1] x [0.25,1], node 64 on x = 0."""
    return GridDomain(-1.0, 1.0, 0.25, 1.0, 129, 129)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
