"""Tests for the scenario builders, their closed forms and the cross checks"""

import math

import numpy as np
import pytest

from src.core.errors import ConfigSchemaError, ScenarioError
from src.core.polynomials import SparsePoly
from src.core.scenarios import (
    ZERO_HOPF_WITNESSES,
    build_scenario,
    cross_check,
    duffing_deltas,
    duffing_inverse,
    duffing_leading_values,
    harmonic_gbar0,
    harmonic_root,
    list_scenarios,
    make_harmonic_potential,
    parity_conditions_hold,
    scenario_names,
    trig_moment,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class TestHarmonicPotential:

    def test_default_root(self, harmonic):
        assert harmonic.reference["m"] == 1
        assert harmonic.reference["root"] == pytest.approx([0.5, -0.5])
        assert all(harmonic.reference["restrictions"].values())

    def test_closed_form_vanishes_at_root(self, harmonic):
        np.testing.assert_allclose(harmonic.closed_forms["gbar0"](0.5, -0.5), [0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(harmonic.closed_forms["gbar0"](1.0, 0.0), [-0.375, -0.5])

    def test_readings_agree_at_z_zero(self):
        coefficients = {"a101": 1.0, "c020": 1.0, "c002": -2.0}
        np.testing.assert_allclose(harmonic_gbar0(coefficients, 0.7, 0.0),
                                   harmonic_gbar0(coefficients, 0.7, 0.0, "printed"))
        assert not np.allclose(harmonic_gbar0(coefficients, 0.7, 0.5),
                               harmonic_gbar0(coefficients, 0.7, 0.5, "printed"))

    @pytest.mark.parametrize("c002, expected", [(-3.0, 1), (-2.0, 1), (-1.0, 1), (1.0, 0), (3.0, 0)])
    def test_restrictions_decide_m(self, c002, expected):
        assert harmonic_root({"a101": 1.0, "c020": 1.0, "c002": c002})["m"] == expected

    def test_degenerate_parameters_disable_root(self):
        result = harmonic_root({"a101": 1.0, "c020": 0.0, "c002": -2.0})
        assert result["m"] == 0
        assert result["root"] is None
        assert not result["restrictions"]["nondegenerate"]

    def test_non_oracle_family_is_pipeline_only(self):
        scenario = build_scenario("harmonic_potential", {"coefficients": {"a300": 1.0}})
        assert "gbar0" not in scenario.closed_forms
        assert scenario.notes
        with pytest.raises(ScenarioError):
            cross_check(scenario)

    def test_h_with_constant_term_is_rejected(self):
        with pytest.raises(ScenarioError):
            make_harmonic_potential(h=SparsePoly({(0, 0): 1.0}, 2))

    def test_cross_check(self, harmonic, quadrature):
        report = cross_check(harmonic, config=quadrature)
        assert report.passed
        assert report.entry("gbar0").passed
        assert report.entry("gbar0_at_root").passed
        printed = report.entry("gbar0_printed")
        assert printed.informational
        assert not printed.passed
        assert report.notes

    def test_second_order_cross_check(self, quadrature):
        scenario = build_scenario("harmonic_potential",
                                  {"coefficients": {"a101": -1.0, "b011": 1.0, "c110": 1.0}})
        assert scenario.reference["degenerate_first_order"]
        report = cross_check(scenario, config=quadrature)
        assert report.entry("rho_bar").passed
        assert report.passed


class TestZeroHopf:

    def test_trig_moments(self):
        assert trig_moment(0, 0) == 1.0
        assert trig_moment(2, 0) == pytest.approx(0.5)
        assert trig_moment(2, 2) == pytest.approx(0.125)
        assert trig_moment(4, 0) == pytest.approx(0.375)
        assert trig_moment(1, 2) == 0.0

    def test_default_cubic_zeros(self, zero_hopf):
        cubic = zero_hopf.reference["cubic"]
        assert cubic["Q2"] == pytest.approx([1.0, 3.0, 1.0])
        zeros = zero_hopf.reference["predicted_zeros"]
        assert zero_hopf.reference["m"] == 2
        radii = sorted(z["rz"][0] for z in zeros)
        assert radii == pytest.approx([GOLDEN, 1.0 + GOLDEN])
        assert all(z["rz"][1] == pytest.approx(0.0, abs=1e-12) for z in zeros)
        assert all(z["simple"] for z in zeros)

    @pytest.mark.parametrize("witness, expected", [("m2", 2), ("m2_wide", 2), ("m1", 1), ("m0", 0),
                                                   ("double_root", 0)])
    def test_witness_counts(self, witness, expected):
        scenario = build_scenario("zero_hopf", {"coefficients": ZERO_HOPF_WITNESSES[witness]})
        assert scenario.reference["m"] == expected

    def test_single_zero_witness_radius(self):
        scenario = build_scenario("zero_hopf", {"coefficients": ZERO_HOPF_WITNESSES["m1"]})
        (zero,) = [z for z in scenario.reference["predicted_zeros"] if z["simple"]]
        assert zero["rz"][0] == pytest.approx(math.sqrt((3.0 + math.sqrt(13.0)) / 2.0))

    def test_parity_conditions(self):
        scenario = build_scenario("zero_hopf", {"coefficients": {"a011": 1.0}})
        assert parity_conditions_hold(scenario.polys)
        assert scenario.reference["identically_zero"]
        assert not parity_conditions_hold(build_scenario("zero_hopf").polys)

    def test_homogeneous_perturbation_has_no_zeros(self):
        scenario = build_scenario("zero_hopf", {"coefficients": {"a120": 1.0, "c003": 1.0, "c021": 2.0}})
        assert scenario.reference["homogeneous_degree"] == 3
        assert scenario.reference["m"] == 0

    def test_cross_check(self, zero_hopf, quadrature):
        report = cross_check(zero_hopf, config=quadrature)
        assert report.passed
        assert report.entry("gbar0_vs_direct_AB").passed
        assert report.entry("gbar0_at_predicted_zeros").passed

    def test_linear_terms_are_rejected(self):
        with pytest.raises(ConfigSchemaError):
            build_scenario("zero_hopf", {"coefficients": {"a100": 1.0}})


class TestDuffing:

    def test_deltas(self):
        default = build_scenario("duffing")
        assert duffing_deltas(default.polys) == pytest.approx((-6.0, 0.0))
        square = build_scenario("duffing", {"coefficients": {"c200": 1.0}})
        assert duffing_deltas(square.polys)[1] == pytest.approx(-2.0)

    def test_leading_values(self, duffing_cubic):
        assert duffing_leading_values(duffing_cubic.polys) == pytest.approx((-0.375, -0.5))
        assert duffing_cubic.reference["g_hat_from_delta"] == pytest.approx([-0.375, -0.5])

    def test_inverse_branch(self):
        assert [float(v) for v in duffing_inverse([math.sqrt(2.0), 0.0, 2.0])] == pytest.approx([1.0, 0.0, 2.0])
        assert [float(v) for v in duffing_inverse([0.3, -0.2, 0.0])] == pytest.approx([0.3, -0.2, 0.0])

    def test_cross_check_reports_delta_discrepancy(self, quadrature):
        report = cross_check(build_scenario("duffing"), config=quadrature)
        entry = report.entry("g_hat_from_delta")
        assert entry.informational
        assert not entry.passed
        assert report.entry("g_hat_leading").passed
        assert report.entry("eta").passed
        assert report.passed
        assert any("pipeline value is kept" in note for note in report.notes)

    def test_cross_check_cubic(self, duffing_cubic, quadrature):
        report = cross_check(duffing_cubic, config=quadrature)
        assert report.entry("g_hat_from_delta").passed
        assert report.passed


class TestRegistry:

    def test_names(self):
        assert scenario_names() == ["harmonic_potential", "zero_hopf", "duffing"]
        listed = list_scenarios()
        assert [s["name"] for s in listed] == scenario_names()
        assert all("defaults" in s and "parameters" in s for s in listed)

    def test_unknown_scenario(self):
        with pytest.raises(ConfigSchemaError) as info:
            build_scenario("van_der_pol")
        assert info.value.problems[0][0] == "scenario.name"

    def test_unknown_parameter(self):
        with pytest.raises(ConfigSchemaError) as info:
            build_scenario("duffing", {"P": {"1": 1.0}})
        assert info.value.problems == [("scenario.parameters.P", "unknown parameter")]

    def test_bad_coefficient_name(self):
        with pytest.raises(ConfigSchemaError):
            build_scenario("harmonic_potential", {"coefficients": {"d101": 1.0}})

    def test_exponent_maps_and_coefficients_combine(self):
        scenario = build_scenario("harmonic_potential", {
            "F": [{"1 0 1": 1.0}, {}, {}],
            "coefficients": {"c020": 1.0, "c002": -2.0},
        })
        assert scenario.reference["root"] == pytest.approx([0.5, -0.5])

    def test_parameters_are_recorded(self, harmonic):
        assert harmonic.parameters["h"] == SparsePoly({(0, 1): 1.0}, 2).to_json()
        assert len(harmonic.parameters["F"]) == 3
