import numpy as np
import pytest

from decoder import train_from_labels
from experiment import Phase, simulate_phase
from models import DEFAULT_TIMING, Condition, ProfileOverrides
from synthgen import default_profile, zero_noise


@pytest.fixture
def cfg():
    return DEFAULT_TIMING


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def profile():
    """Calibrated subject with the spread gain switched off"""
    return default_profile(7, ProfileOverrides(global_gain=1.0))


@pytest.fixture(scope="session")
def quiet_profile(profile):
    return zero_noise(profile)


@pytest.fixture(scope="session")
def noisy_model(profile):
    """Decoder trained on a calibrated condition-3 training phase"""
    phase = simulate_phase(profile, Condition.ERP_PLUS_MEANINGFUL, 20, 99, (0, 3, Phase.TRAINING))
    return train_from_labels(phase.features, phase.labels)


@pytest.fixture(scope="session")
def quiet_model(quiet_profile):
    """Decoder trained on noise-free condition-1 data"""
    phase = simulate_phase(quiet_profile, Condition.ERP_ONLY, 20, 99, (0, 1, Phase.TRAINING))
    return train_from_labels(phase.features, phase.labels)
