"""Tests for first- and second-order averaging"""

import math

import numpy as np
import pytest

from src.core.averaging import (
    AveragedMap,
    FourierAntiderivative,
    QuadratureConfig,
    _refine,
    theta_nodes,
)
from src.core.errors import ConfigurationError, OrderGateError, QuadratureError
from src.core.scenarios import build_scenario, harmonic_gbar0, harmonic_rho_bar

HARMONIC_COEFFICIENTS = {"a101": 1.0, "c020": 1.0, "c002": -2.0}
SECOND_ORDER = {"coefficients": {"a101": -1.0, "b011": 1.0, "c110": 1.0}}


def test_fourier_antiderivative_of_trigonometric_samples():
    nodes = theta_nodes(32)
    antiderivative = FourierAntiderivative(1.0 + np.cos(nodes))
    assert antiderivative(1.0) == pytest.approx(1.0 + math.sin(1.0))
    assert antiderivative.mean == pytest.approx(1.0)


def test_theta_weighted_mean():
    nodes = theta_nodes(64)
    assert FourierAntiderivative(np.ones(64)).theta_weighted_mean() == pytest.approx(math.pi)
    assert FourierAntiderivative(np.sin(nodes)).theta_weighted_mean() == pytest.approx(-1.0)


def test_quadrature_config_validation():
    with pytest.raises(ConfigurationError):
        QuadratureConfig(nodes=12)
    with pytest.raises(ConfigurationError):
        QuadratureConfig(tol=0.0)


def test_refinement_failure_raises():
    rough = lambda thetas: np.abs(np.sin(thetas))[None, :]
    with pytest.raises(QuadratureError):
        _refine(rough, QuadratureConfig(nodes=8, tol=1e-15, max_doublings=1), lambda s: s.mean(axis=-1), {})


def test_gbar0_reference_value(harmonic, quadrature):
    averaged = harmonic.averaged_map(quadrature)
    np.testing.assert_allclose(averaged.gbar0(1.0, [0.0]), [-0.375, -0.5], atol=1e-10)


@pytest.mark.parametrize("point", [(0.7, 0.3), (1.2, -0.4), (0.3, 1.5)])
def test_gbar0_matches_closed_form(harmonic, quadrature, point):
    averaged = harmonic.averaged_map(quadrature)
    r, z = point
    np.testing.assert_allclose(averaged.gbar0(r, [z]), harmonic_gbar0(HARMONIC_COEFFICIENTS, r, z), atol=1e-9)


def test_jet_jacobian_matches_finite_differences(harmonic, quadrature):
    averaged = harmonic.averaged_map(quadrature)
    value, jacobian = averaged.gbar0_value_and_jacobian(0.9, [0.2])
    step = 1e-6
    columns = []
    for i in range(2):
        up = np.array([0.9, 0.2])
        down = up.copy()
        up[i] += step
        down[i] -= step
        columns.append((averaged.gbar0(up[0], up[1:]) - averaged.gbar0(down[0], down[1:])) / (2 * step))
    np.testing.assert_allclose(value, averaged.gbar0(0.9, [0.2]), atol=1e-14)
    np.testing.assert_allclose(jacobian, np.array(columns).T, atol=1e-7)


def test_jacobian_at_closed_form_root(harmonic, quadrature):
    averaged = harmonic.averaged_map(quadrature)
    value, jacobian = averaged.gbar0_value_and_jacobian(0.5, [-0.5])
    np.testing.assert_allclose(value, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(jacobian, [[-3.0, 1.0], [-4.0, 0.0]], atol=1e-9)


def test_second_order_average_matches_closed_form(quadrature):
    scenario = build_scenario("harmonic_potential", SECOND_ORDER)
    averaged = scenario.averaged_map(quadrature, order=2)
    assert averaged.gate.passed
    for r, z in ((0.8, 0.2), (1.1, -0.3)):
        np.testing.assert_allclose(averaged.evaluate(r, [z]),
                                   harmonic_rho_bar(SECOND_ORDER["coefficients"], r, z), atol=1e-9)


def test_second_order_requires_vanishing_first_order(harmonic, quadrature):
    averaged = harmonic.averaged_map(quadrature, order=2)
    assert not averaged.gate.passed
    with pytest.raises(OrderGateError):
        averaged.evaluate(0.8, [0.2])


def test_order_must_be_one_or_two(harmonic, quadrature):
    with pytest.raises(ConfigurationError):
        AveragedMap(harmonic.standard_form(), quadrature, order=3)


def test_zero_hopf_parity_gives_vanishing_average(quadrature):
    scenario = build_scenario("zero_hopf", {"F": [{"0 1 1": 1.0}, {}, {}]})
    averaged = scenario.averaged_map(quadrature)
    assert np.abs(averaged.gbar0(0.7, [0.4])).max() < 1e-12
    assert scenario.reference["parity_conditions"]
