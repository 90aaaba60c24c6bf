import math
import warnings

import pytest

from elliptical_radon import Gaussian, PhantomSpec, make_model
from elliptical_radon.spectral import _default_data

SQRT2 = math.sqrt(2)


@pytest.fixture(scope="session")
def model2():
    return make_model(SQRT2, 2)


@pytest.fixture(scope="session")
def gauss2():
    return PhantomSpec((Gaussian((0.0,), (1.0, 1.0)),), 2)


@pytest.fixture(scope="session")
def gauss_data2(model2, gauss2):
    """Derived data of the unit Gaussian on the default acquisition grid."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _default_data(gauss2, model2, 12.0, 0.0625, 0.02)
