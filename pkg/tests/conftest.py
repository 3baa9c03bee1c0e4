"""Shared fixtures: the two reference parameter sets used throughout the tests.

Set A is the no-jump (pure diffusion) configuration with a closed-form
solution simple enough to check by hand; set B adds exponential jumps and
exercises the three-root machinery.
"""
from __future__ import annotations

import pytest

from cancelput.model import make_model
from cancelput.pricer import Contract


@pytest.fixture(scope="session")
def model_nojump():
    return make_model(r=0.05, sigma2=0.2, lam=0.0, rho=1.0)


@pytest.fixture(scope="session")
def model_jumps():
    return make_model(r=0.05, sigma2=0.2, lam=5.0, rho=2.0)


@pytest.fixture(scope="session")
def contract():
    return Contract(strike=100.0, barrier=120.0, spot=110.0)
