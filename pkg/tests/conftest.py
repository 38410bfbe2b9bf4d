import copy
import json

import pytest

from model import FrequencyLimits, FrServiceSpec, ScenarioLibrary

ED_SINGLE = {
    "name": "test fleet",
    "mode": "ED",
    "limits": {"f0": 50.0, "rocof_max": 1.0, "delta_f_max": 0.8},
    "services": [{"name": "PFR", "delivery_time": 10.0, "delay": 0.0}],
    "fleet": [
        {"name": "nuclear", "unit_count": 1, "p_min": 100.0, "p_max": 100.0, "inertia_const": 6.0,
         "marginal_cost": 15.0, "is_largest_infeed": True, "must_run": True},
        {"name": "type1", "unit_count": 5, "p_min": 0.0, "p_max": 80.0, "fr_capacity": 225.0,
         "fr_service": "PFR", "inertia_const": 6.0, "marginal_cost": 17.0},
        {"name": "type2", "unit_count": 5, "p_min": 0.0, "p_max": 60.0, "fr_capacity": 175.0,
         "fr_service": "PFR", "inertia_const": 6.0, "marginal_cost": 18.0},
    ],
    "loss": {"p_loss_max": 100.0, "inertia_const_loss": 6.0},
    "demand": 250.0,
}


@pytest.fixture
def scenario_data():
    """Mutable copy of a valid single-service ED scenario"""
    return copy.deepcopy(ED_SINGLE)


@pytest.fixture
def scenario_text(scenario_data):
    return json.dumps(scenario_data)


@pytest.fixture(scope="session")
def library():
    return ScenarioLibrary()


@pytest.fixture(scope="session")
def ed_single(library):
    return library.load("ed_single_fr.json")


@pytest.fixture(scope="session")
def ed_multi(library):
    return library.load("ed_multi_speed.json")


@pytest.fixture(scope="session")
def ed_delayed(library):
    return library.load("ed_delayed_fr.json")


@pytest.fixture
def limits():
    return FrequencyLimits(f0=50.0, rocof_max=1.0, delta_f_max=0.8)


@pytest.fixture
def two_services():
    return (FrServiceSpec("FR1", 7.0), FrServiceSpec("FR2", 10.0))


@pytest.fixture
def delayed_services():
    return (FrServiceSpec("FR1", 7.0, 0.4), FrServiceSpec("FR2", 10.0))
