"""Tests for Darboux charts, inversion and the standard form"""

import math

import numpy as np
import pytest

from src.core.errors import DomainError, PolarSingularityError
from src.core.jets import base_value
from src.core.reduction import (
    DarbouxChart,
    chart_inverse_jet,
    chart_self_check,
    defining_identity_residual,
    invert_chart,
    newton_inverse,
)
from src.core.scenarios import build_scenario, duffing_eta


def test_forward_map(harmonic):
    y = harmonic.chart.phi_forward([0.3, 0.2, 0.5])
    assert [float(base_value(v)) for v in y] == pytest.approx([0.3, 0.3, 0.5])


def test_closed_inverse_round_trip(harmonic):
    x = invert_chart(harmonic.chart, [0.3, 0.3, 0.5])
    np.testing.assert_allclose(x, [0.3, 0.2, 0.5])


def test_duffing_chart_example():
    duffing = build_scenario("duffing")
    x = invert_chart(duffing.chart, [math.sqrt(2.0), 0.0, 2.0])
    np.testing.assert_allclose(x, [1.0, 0.0, 2.0], atol=1e-14)


def test_newton_inverse_agrees_with_closed_form():
    duffing = build_scenario("duffing")
    numeric = DarbouxChart(duffing.spec, u_predicate=duffing.chart.u_predicate, name="duffing-newton")
    y = [0.6, -0.2, 0.8]
    np.testing.assert_allclose(newton_inverse(numeric, y), invert_chart(duffing.chart, y), atol=1e-11)


def test_inverse_jet_partials_invert_the_forward_jacobian(harmonic):
    numeric = DarbouxChart(harmonic.spec, name="harmonic-newton")
    y = [0.4, -0.3, 0.2]
    x = chart_inverse_jet(numeric, y, seeds=np.eye(3))
    D = np.array([[float(base_value(e)) for e in row]
                  for row in numeric.forward_jacobian([float(base_value(v)) for v in x])])
    partials = np.array([[float(p) for p in xi.partials] for xi in x])
    np.testing.assert_allclose(partials, np.linalg.inv(D), atol=1e-10)


def test_domain_violation_is_reported(harmonic):
    # 1 + x3 > 0 is required
    with pytest.raises(DomainError):
        invert_chart(harmonic.chart, [0.2, 0.1, -1.5])


def test_chart_self_check(harmonic):
    report = chart_self_check(harmonic.chart, 50)
    assert report["identity_error"] < 1e-12
    assert report["round_trip_error"] < 1e-12
    assert report["samples"] + report["skipped_outside_domain"] == 50


def test_defining_identity(harmonic, zero_hopf):
    for scenario, x in ((harmonic, [0.3, -0.2, 0.4]), (zero_hopf, [0.5, 0.1, -0.3])):
        assert defining_identity_residual(scenario.chart, scenario.perturbed, x, 0.01) < 1e-10


def test_duffing_eta_matches_chart():
    duffing = build_scenario("duffing")
    y = [0.3, 0.1, 0.5]
    assert float(duffing.chart.eta(y)) == pytest.approx(float(duffing_eta(y)), abs=1e-12)


def test_standard_form_eps_derivative(harmonic):
    sf = harmonic.standard_form()
    theta, r, z = 0.7, 0.8, [0.3]
    g0, g1 = sf.jet_rhs(theta, r, z)
    step = 1e-6
    up = np.array([float(v) for v in sf.G(theta, r, z, step)])
    down = np.array([float(v) for v in sf.G(theta, r, z, -step)])
    np.testing.assert_allclose([float(v) for v in g0], sf.G(theta, r, z, 0.0), atol=1e-14)
    np.testing.assert_allclose([float(v) for v in g1], (up - down) / (2 * step), atol=1e-6)


def test_standard_form_guards(harmonic):
    sf = harmonic.standard_form()
    with pytest.raises(PolarSingularityError):
        sf.G(0.0, 1e-8, [0.0], 0.0)
    assert sf.rhs(0.3, 0.5, [0.1], 0.0) == [0.0, 0.0]


def test_contains_broadcasts_constant_coordinates(harmonic):
    theta_nodes = np.array([0.1, 0.2, -3.0])
    inside = harmonic.chart.contains([theta_nodes, np.array([0.3, 0.4, 0.5]), 0.5])
    assert np.shape(inside) == (3,)
    assert inside.tolist() == [True, True, True]
    outside = harmonic.chart.contains([np.array([0.1, 0.2]), 0.0, -1.5])
    assert outside.tolist() == [False, False]


def test_vectorised_standard_form_with_constant_z(harmonic):
    sf = harmonic.standard_form()
    theta = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
    components = [np.asarray(base_value(g), dtype=float) for g in sf.G(theta, 0.8, [0.3], 0.0)]
    vectorised = np.broadcast_arrays(*components, theta)[:-1]
    for k, t in enumerate(theta):
        np.testing.assert_allclose([v[k] for v in vectorised], sf.G(float(t), 0.8, [0.3], 0.0), atol=1e-13)
