import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile('lab', deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile('lab')


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def qubit_witness():
    """diag(0.8, 0.2), the qubit state the falsification witnesses are evaluated at."""
    return np.diag([0.8, 0.2]).astype(complex)
