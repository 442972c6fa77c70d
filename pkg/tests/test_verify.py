"""Tests for Poincare shooting, continuation in eps and orbit mapping"""

import math

import numpy as np
import pytest

from src.core.errors import ConfigurationError, IntegrationError
from src.core.scenarios import build_scenario
from src.core.verify import (
    ShootingSettings,
    continuation_in_epsilon,
    fit_log_slope,
    integrate_standard_form,
    period_map,
    poincare_shoot,
    reintegrate_original,
)

EPS = 1e-2
ROOT = (0.5, -0.5)


def test_fit_log_slope():
    assert fit_log_slope([1e-2, 1e-3, 1e-4], [3e-2, 3e-3, 3e-4]) == pytest.approx(1.0)
    assert fit_log_slope([1e-2, 1e-3], [1e-4, 1e-6]) == pytest.approx(2.0)


def test_unperturbed_period_map_is_identity(integrator):
    scenario = build_scenario("harmonic_potential", {"coefficients": {}})
    P, M = period_map(scenario.standard_form(), [0.6, 0.1], EPS, integrator)
    np.testing.assert_allclose(P, [0.6, 0.1], atol=1e-12)
    np.testing.assert_allclose(M, np.eye(2), atol=1e-12)


def test_zero_perturbation_is_degenerate(integrator):
    scenario = build_scenario("harmonic_potential", {"coefficients": {}})
    certificate = poincare_shoot(scenario.standard_form(), EPS, [0.6, 0.1], integrator)
    assert certificate.status == "degenerate"
    assert certificate.distance is None


def test_monodromy_matches_finite_differences(harmonic, integrator):
    sf = harmonic.standard_form()
    v = np.array([0.6, -0.3])
    _, M = period_map(sf, v, EPS, integrator)
    step = 1e-4
    columns = []
    for i in range(2):
        up, down = v.copy(), v.copy()
        up[i] += step
        down[i] -= step
        columns.append((period_map(sf, up, EPS, integrator)[0] - period_map(sf, down, EPS, integrator)[0]) / (2 * step))
    np.testing.assert_allclose(M, np.array(columns).T, atol=1e-5)


def test_shooting_converges_near_the_averaged_zero(harmonic, integrator):
    certificate = poincare_shoot(harmonic.standard_form(), EPS, ROOT, integrator)
    assert certificate.converged
    assert certificate.residual <= 1e-9
    assert certificate.distance < 10 * EPS
    # stable zero of gbar0: both multipliers inside the unit circle
    assert all(abs(m) < 1.0 for m in certificate.floquet_multipliers)
    # linear frequency 1 + z = 1/2 gives period ~ 4 pi
    assert certificate.period_t == pytest.approx(4 * math.pi, rel=0.05)
    assert certificate.orbit.closure_gap < 1e-6
    document = certificate.to_dict()
    assert document["status"] == "converged"
    assert len(document["orbit"]["x"]) == ShootingSettings().orbit_samples


def test_orbit_closes_in_original_coordinates(harmonic, integrator):
    certificate = poincare_shoot(harmonic.standard_form(), EPS, ROOT, integrator)
    x0 = certificate.orbit.x[0]
    x_end = reintegrate_original(harmonic.perturbed, x0, certificate.period_t, EPS, integrator)
    assert np.abs(x_end - x0).max() < 1e-5


def test_continuation_distance_scales_with_eps(harmonic, integrator):
    table = continuation_in_epsilon(harmonic.standard_form(), ROOT, [1e-2, 5e-3, 2.5e-3], integrator)
    assert [row.certificate.status for row in table.rows] == ["converged"] * 3
    assert not table.truncated
    # rho_bar vanishes at this zero, so the O(eps) shift of the fixed point does too
    assert 1.7 < table.slope < 2.3
    distances = [row.certificate.distance for row in table.rows]
    assert distances == sorted(distances, reverse=True)


def test_first_order_shift_of_the_fixed_point_vanishes(harmonic, quadrature):
    averaged = harmonic.averaged_map(quadrature)
    _, jacobian = averaged.gbar0_value_and_jacobian(ROOT[0], ROOT[1:])
    shift = np.linalg.solve(jacobian, -averaged.rho_bar(ROOT[0], ROOT[1:]))
    assert np.abs(shift).max() < 1e-4


@pytest.mark.parametrize("eps_list", [[1e-3, 1e-2], [1e-2, 1e-2], [], [1e-2, -1e-3]])
def test_continuation_requires_decreasing_positive_eps(harmonic, eps_list):
    with pytest.raises(ConfigurationError):
        continuation_in_epsilon(harmonic.standard_form(), ROOT, eps_list)


def test_degenerate_rows_do_not_truncate(integrator):
    scenario = build_scenario("harmonic_potential", {"coefficients": {}})
    table = continuation_in_epsilon(scenario.standard_form(), (0.6, 0.1), [1e-2, 1e-3], integrator)
    assert [row.certificate.status for row in table.rows] == ["degenerate", "degenerate"]
    assert table.slope is None
    assert table.flagged
    assert not table.truncated


def test_trajectory_tracks_time(harmonic, integrator):
    trajectory = integrate_standard_form(harmonic.standard_form(), [0.4, 0.0], EPS, config=integrator, samples=9)
    assert trajectory.states.shape == (9, 2)
    assert trajectory.times[0] == 0.0
    # one turn at z = 0 takes about 2 pi
    assert abs(trajectory.times[-1]) == pytest.approx(2 * math.pi, rel=0.05)


def test_start_below_r_min_is_rejected(harmonic):
    with pytest.raises(IntegrationError):
        integrate_standard_form(harmonic.standard_form(), [1e-8, 0.0], EPS)


def test_no_orbit_when_start_leaves_the_domain(harmonic, integrator):
    certificate = poincare_shoot(harmonic.standard_form(), EPS, [0.5, -1.5], integrator)
    assert certificate.status == "no_orbit"
    assert certificate.message
