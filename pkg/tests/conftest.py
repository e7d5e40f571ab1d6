import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irsfp.channel import EffectiveChannels, Scenario, draw_instance, random_phases

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def small_instance(seed, K=3, L=2, M=2, noise_mode="expectation", **kw):
    positions = ((100.0, 50.0), (100.0, -50.0), (200.0, 50.0), (200.0, -50.0))[:L]
    sc = Scenario(K=K, L=L, M=(M,) * L, irs_positions=positions, **kw)
    _, real, eff = draw_instance(sc, seed, noise_mode)
    return sc, real, eff


def random_point(rng, sc, eff):
    p = sc.p_max * rng.random(eff.K)
    theta = random_phases(rng, eff.N) * np.sqrt(rng.random(eff.N))
    return p, theta


def scalar_channels(v, c=0.0) -> EffectiveChannels:
    """K = 1, N = 1 channels with cascade ``v`` and reflected-noise power ``c``."""
    return EffectiveChannels(
        np.array([[[v]]], dtype=complex), np.array([[[c]]], dtype=complex)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
