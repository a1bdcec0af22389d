import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from optimality_oracles import random_instance, reference_params  # noqa: E402
from power_rate_model import AccessPoint, RadioLink, SystemParams, UserTerminal  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale sweeps (deselect with -m 'not slow')")


@pytest.fixture
def reference():
    """(SystemParams, AccessPoint) of the reference parameter table."""
    return reference_params()


@pytest.fixture
def unit_params():
    """B = 15000 Hz, Gamma sigma^2 = 1 mW, xi = 0.38."""
    return SystemParams(bandwidth_per_link=15000.0, noise_variance=1.0, snr_gap=1.0,
                        amplifier_efficiency=0.38)


@pytest.fixture
def make_user():
    def _make(user_id, gains, p_dyn=30.0, p_sta=100.0, weight=1.0, p_max=316.2):
        links = tuple(RadioLink(f"{user_id}-l{i}", g, p_max) for i, g in enumerate(gains))
        return UserTerminal(user_id, links, p_dyn=p_dyn, p_sta=p_sta, weight=weight)
    return _make


@pytest.fixture
def reference_ap():
    return AccessPoint(p_dyn_rx=45.0, p_sta_rx=5000.0)


@pytest.fixture
def small_instances():
    """200 seeded instances with 1-3 users of 1-3 links, gains log-uniform over six decades."""
    params, ap = reference_params()
    instances = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        num_users = int(rng.integers(1, 4))
        links = [int(n) for n in rng.integers(1, 4, size=num_users)]
        instances.append((random_instance(rng, num_users, links, params), ap, params))
    return instances
