import pytest

from maneuverforge.dynamics import load_vehicle
from maneuverforge.validation import ConstraintSet


@pytest.fixture(scope="session")
def sedan():
    return load_vehicle("sedan")


@pytest.fixture(scope="session")
def coupe():
    return load_vehicle("sports_coupe")


@pytest.fixture(scope="session")
def default_constraints():
    return ConstraintSet()
