"""Tests for forward-mode jets and jet-evaluated fields"""

import math

import numpy as np
import pytest

from src.core import jets
from src.core.errors import ConfigurationError
from src.core.fields import MatrixField, ScalarField, VectorField, darboux_matrix, jet_eval
from src.core.jets import Jet1, dual_gradient, dual_jacobian, partials_at
from src.core.polynomials import SparsePoly, all_monomials


def test_product_rule():
    x, y = Jet1.variables([2.0, 3.0])
    out = x * x * y
    assert out.value == 12.0
    assert out.partials == (12.0, 4.0)


def test_quotient_and_elementary_functions():
    value, grad = dual_gradient(lambda p: jets.sin(p[0]) / p[1], [0.5, 2.0])
    assert value == pytest.approx(math.sin(0.5) / 2.0)
    assert grad[0] == pytest.approx(math.cos(0.5) / 2.0)
    assert grad[1] == pytest.approx(-math.sin(0.5) / 4.0)


def test_sqrt_exp_log_and_fractional_power():
    _, grad = dual_gradient(lambda p: jets.sqrt(p[0]) + jets.exp(p[1]) + jets.log(p[2]) + p[0] ** 1.5,
                            [4.0, 0.0, 2.0])
    assert grad[0] == pytest.approx(0.25 + 1.5 * 2.0)
    assert grad[1] == pytest.approx(1.0)
    assert grad[2] == pytest.approx(0.5)


def test_reflected_operators_with_constants():
    (x,) = Jet1.variables([3.0])
    out = 1.0 - 2.0 / x + 5.0 * x
    assert out.value == pytest.approx(1.0 - 2.0 / 3.0 + 15.0)
    assert out.partials[0] == pytest.approx(2.0 / 9.0 + 5.0)


def test_nested_jets_give_second_derivatives():
    outer = Jet1.variables([2.0])
    _, grad = dual_gradient(lambda p: p[0] ** 3, outer)
    first = grad[0]
    assert jets.base_value(first) == pytest.approx(12.0)
    assert partials_at(first, outer[0].tag, 1)[0] == pytest.approx(12.0)


def test_array_valued_jets_evaluate_in_lock_step():
    tag = jets.new_tag()
    x = Jet1(np.array([1.0, 2.0, 3.0]), [np.ones(3)], tag)
    out = jets.sin(x) * x
    expected = np.cos(x.value) * x.value + np.sin(x.value)
    np.testing.assert_allclose(out.partials[0], expected)


def test_dual_jacobian_of_vector_function():
    values, rows = dual_jacobian(lambda p: [p[0] * p[1], p[1] - p[2]], [1.0, 2.0, 3.0])
    assert values == [2.0, -1.0]
    assert rows == [[2.0, 1.0, 0.0], [0.0, 1.0, -1.0]]


def test_mixed_seed_counts_are_rejected():
    tag = jets.new_tag()
    point = [Jet1(1.0, [1.0, 0.0], tag), Jet1(2.0, [1.0], tag), 0.0]
    with pytest.raises(ConfigurationError):
        jets.check_uniform_seeds(point)


def test_jet_eval_checks_arity():
    field = ScalarField(lambda x: x[0] * x[1], 2, "xy")
    with pytest.raises(ConfigurationError):
        jet_eval(field, [1.0, 2.0, 3.0])
    assert jet_eval(field, [2.0, 5.0]) == 10.0


def test_vector_and_matrix_fields():
    v = VectorField.from_components([ScalarField.coordinate(1, 3), ScalarField.constant(4.0, 3)])
    assert v([1.0, 2.0, 3.0]) == [2.0, 4.0]
    m = MatrixField.constant(darboux_matrix(3))
    assert m([0.0, 0.0, 0.0])[0][1] == 1.0
    assert m([0.0, 0.0, 0.0])[1][0] == -1.0
    bad = VectorField(lambda x: [x[0]], 3, 2, "short")
    with pytest.raises(ConfigurationError):
        bad([1.0, 2.0, 3.0])


def test_gradients_of_random_polynomials_match_central_differences():
    rng = np.random.default_rng(100)
    monomials = list(all_monomials(3, 4))
    step = 1e-6
    for _ in range(100):
        chosen = rng.choice(len(monomials), size=6, replace=False)
        p = SparsePoly({monomials[i]: float(rng.normal()) for i in chosen}, 3)
        point = rng.uniform(-1.0, 1.0, 3)
        value, grad = dual_gradient(p, list(point))
        assert float(value) == pytest.approx(float(p(list(point))), abs=1e-12)
        for i in range(3):
            up, down = point.copy(), point.copy()
            up[i] += step
            down[i] -= step
            expected = (float(p(list(up))) - float(p(list(down)))) / (2.0 * step)
            assert float(grad[i]) == pytest.approx(expected, abs=1e-6)
