"""Shared fixtures for the PoissonOrbits test suite"""

import sys
from pathlib import Path

import pytest

# Make `src` importable as a package
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.core.averaging import QuadratureConfig
from src.core.integrator import IntegratorConfig
from src.core.scenarios import build_scenario


@pytest.fixture
def quadrature():
    return QuadratureConfig(nodes=32, tol=1e-11, max_doublings=4)


@pytest.fixture
def integrator():
    return IntegratorConfig(rtol=1e-9, atol=1e-11)


@pytest.fixture
def harmonic():
    """Harmonic potential with h = x3 and F = (x1 x3, 0, x2^2 - 2 x3^2)."""
    return build_scenario("harmonic_potential")


@pytest.fixture
def zero_hopf():
    return build_scenario("zero_hopf")


@pytest.fixture
def duffing_cubic():
    """Duffing with F = (x1^3, 0, x1^2): nonzero leading reduced averages."""
    return build_scenario("duffing", {"coefficients": {"a300": 1.0, "c200": 1.0}})
