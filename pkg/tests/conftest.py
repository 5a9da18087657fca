import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cooptopp.scenario import load_scenario, prepare

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def stanford_cfg():
    return load_scenario("stanford-duo")


@pytest.fixture(scope="session")
def stanford_p1(stanford_cfg):
    """Models, sampled path and coefficients of P.1 on the K=80 grid."""
    return prepare(stanford_cfg)


@pytest.fixture(scope="session")
def rail_cfg():
    return load_scenario("pointmass-rail")


@pytest.fixture(scope="session")
def rail_prep(rail_cfg):
    return prepare(rail_cfg)


@pytest.fixture(scope="session")
def planar_cfg():
    return load_scenario("planar-3r-duo")


@pytest.fixture(scope="session")
def planar_prep(planar_cfg):
    return prepare(planar_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
