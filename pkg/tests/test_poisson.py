"""Tests for Poisson specs, perturbations and sampled validation"""

import numpy as np
import pytest

from src.core.errors import ConfigurationError, DomainError
from src.core.fields import MatrixField, ScalarField, darboux_matrix
from src.core.poisson import (
    PerturbedSpec,
    PoissonSpec,
    check_sample,
    numerical_rank,
    structure_matrix,
    validate_poisson,
)
from src.core.polynomials import perturbation_field, polys_from_coefficients


def _spec(J0, h2=None, I=None):
    return PoissonSpec(
        n=3,
        J0=J0,
        I=I or ScalarField.constant(1.0, 3, "I"),
        h=(ScalarField.constant(1.0, 3, "h1"), h2 or ScalarField.constant(1.0, 3, "h2")),
        phi=(ScalarField.constant(0.0, 3, "phi3"),),
    )


def test_harmonic_structure_is_valid(harmonic):
    report = validate_poisson(harmonic.spec, 20)
    assert report.valid
    assert report.sample_count == 20
    assert report.ranks == (2,)


def test_zero_hopf_structure_is_valid(zero_hopf):
    report = validate_poisson(zero_hopf.spec, 20)
    assert report.valid
    assert report.residual("casimir") < 1e-10


def test_jacobi_and_casimir_failures_are_reported():
    # J12 = 1, J13 = x1: v . curl v = -1, and x3 is not a Casimir
    broken = MatrixField(lambda x: [[0.0, 1.0, x[0]], [-1.0, 0.0, 0.0], [-x[0], 0.0, 0.0]], 3, "broken")
    report = validate_poisson(_spec(broken), 10)
    checks = {f.check for f in report.failures}
    assert not report.valid
    assert "jacobi" in checks
    assert "casimir" in checks


def test_rank_failure():
    report = validate_poisson(_spec(MatrixField.constant([[0.0] * 3] * 3)), 5)
    assert "rank" in {f.check for f in report.failures}


def test_full_rank_four_dimensional_structure_fails_the_rank_check():
    symplectic = [[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -1.0, 0.0]]
    spec = PoissonSpec(
        n=4,
        J0=MatrixField.constant(symplectic),
        I=ScalarField.constant(1.0, 4, "I"),
        h=(ScalarField.constant(1.0, 4, "h1"), ScalarField.constant(1.0, 4, "h2")),
        phi=(ScalarField.constant(0.0, 4, "phi3"), ScalarField.constant(0.0, 4, "phi4")),
    )
    report = validate_poisson(spec, 5)
    assert not report.valid
    assert report.ranks == (4,)
    rank_failures = [f for f in report.failures if f.check == "rank"]
    assert len(rank_failures) == 5
    assert report.residual("antisymmetry") == 0.0


def test_hamiltonian_factor_must_be_one_at_origin():
    with pytest.raises(ConfigurationError):
        _spec(MatrixField.constant(darboux_matrix(3)), h2=ScalarField.constant(2.0, 3, "h2"))


def test_report_merge_is_associative(harmonic):
    a, b, c = (check_sample(harmonic.spec, x) for x in ([0.1, 0.2, 0.3], [-0.5, 0.4, 0.0], [0.9, -0.9, 0.8]))
    assert a.merge(b).merge(c) == a.merge(b.merge(c))


def test_perturbation_must_vanish_to_second_order(harmonic):
    linear = perturbation_field(polys_from_coefficients({"a100": 1.0}))
    with pytest.raises(ConfigurationError):
        PerturbedSpec(harmonic.spec, linear)


def test_vector_field(harmonic):
    # H = (x1^2 + x2^2 (1 + x3)^2) / 2 with J = J_D
    flow = harmonic.perturbed.vector_field([0.3, 0.2, 0.5], 0.0)
    np.testing.assert_allclose(flow, [0.2 * 2.25, -0.3, 0.0])
    perturbed = harmonic.perturbed.vector_field([0.3, 0.2, 0.5], 0.1)
    # F = (x1 x3, 0, x2^2 - 2 x3^2)
    np.testing.assert_allclose(perturbed - flow, 0.1 * np.array([0.15, 0.0, 0.04 - 0.5]))


def test_structure_matrix_requires_nonvanishing_integral():
    spec = _spec(MatrixField.constant(darboux_matrix(3)), I=ScalarField(lambda x: 1.0 - x[0], 3, "I"))
    with pytest.raises(DomainError):
        structure_matrix(spec, [1.0, 0.0, 0.0])


def test_numerical_rank():
    assert numerical_rank(np.array(darboux_matrix(3))) == 2
    assert numerical_rank(np.eye(3)) == 3
