import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spendseq import synth

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_preset():
    """Paper preset at 2000 users: events, profiles, ground truth."""
    cfg = synth.calibrate_paper_preset().replace(n_users=2000)
    return synth.generate(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def preset_10k():
    cfg = synth.calibrate_paper_preset().replace(n_users=10_000)
    return synth.generate(cfg)
