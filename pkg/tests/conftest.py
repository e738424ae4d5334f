"""Shared fixtures and hypothesis profiles."""

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, Verbosity, settings

import coopbeam as cb

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=10, deadline=None)
settings.register_profile("dev", max_examples=5, deadline=None)
settings.register_profile("debug", max_examples=5, verbosity=Verbosity.verbose, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


def random_channel_set(rng, n=4, m1=3, m2=3, k=2, scale=1.0):
    """Unstructured complex-normal channel set for algebraic tests."""

    def c(*shape):
        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    return cb.ChannelSet.from_links(c(m1, k), c(m2, k), c(m2, m1), c(n, m1), c(n, m2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def small_su_scenario():
    return cb.SystemScenario(n_bs=4, m1=6, m2=6, n_users=1, seed=3)


@pytest.fixture
def small_su_channels(small_su_scenario):
    return cb.build_double_irs_scenario(small_su_scenario)
