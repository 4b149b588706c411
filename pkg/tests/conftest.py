import os

import numpy as np
import pytest

from skewlab import _kernels
from skewlab.classification import classify
from skewlab.systems import load_system

INPUTS = os.path.join(os.path.dirname(__file__), os.pardir, "inputs")


def input_path(name: str) -> str:
    return os.path.join(INPUTS, name)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted kernels once so no test pays the warm-up cost."""
    _kernels.warm_up()


@pytest.fixture(scope="session")
def prototype_system():
    return load_system(input_path("prototype.sys"))


@pytest.fixture(scope="session")
def quarter_system():
    return load_system(input_path("rotation_quarter.sys"))


@pytest.fixture(scope="session")
def localized_system():
    return load_system(input_path("localized.sys"))


@pytest.fixture(scope="session")
def generic_system():
    return load_system(input_path("generic.sys"))


@pytest.fixture(scope="session")
def localized_report(localized_system):
    return classify(localized_system)


@pytest.fixture(scope="session")
def generic_report(generic_system):
    return classify(generic_system)


@pytest.fixture(scope="session")
def cat_matrix():
    return np.array([[2, 1], [1, 1]])
