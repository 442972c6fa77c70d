"""Tests for the Dormand-Prince integrator"""

import math

import numpy as np
import pytest

from src.core.errors import ConfigurationError, IntegrationError, SlowAngleError
from src.core.integrator import IntegratorConfig, StepStats, dormand_prince, integrate_samples


def test_exponential_decay():
    config = IntegratorConfig(rtol=1e-10, atol=1e-12)
    y = dormand_prince(lambda t, y: -y, 0.0, [1.0, 2.0], 3.0, config)
    np.testing.assert_allclose(y, [math.exp(-3.0), 2.0 * math.exp(-3.0)], rtol=1e-8)


def test_harmonic_oscillator_backwards():
    config = IntegratorConfig(rtol=1e-10, atol=1e-12)
    def rotate(t, y):
        return np.array([y[1], -y[0]])

    y = dormand_prince(rotate, 2 * math.pi, [1.0, 0.0], 0.0, config)
    np.testing.assert_allclose(y, [1.0, 0.0], atol=1e-8)


def test_samples_and_statistics():
    config = IntegratorConfig(rtol=1e-9, atol=1e-12)
    stats = StepStats()
    times = np.linspace(0.0, 1.0, 5)
    states = integrate_samples(lambda t, y: np.array([2.0 * t]), [0.0], times, config, stats=stats)
    np.testing.assert_allclose(states[:, 0], times ** 2, atol=1e-12)
    assert stats.accepted >= 4
    assert stats.evaluations > stats.accepted


def test_error_mask_excludes_components():
    config = IntegratorConfig(rtol=1e-6, atol=1e-9)
    def fun(t, y):
        return np.array([-y[0], 50.0 * np.cos(50.0 * t)])

    masked, full = StepStats(), StepStats()
    dormand_prince(fun, 0.0, [1.0, 0.0], 1.0, config, error_mask=np.array([True, False]), stats=masked)
    dormand_prince(fun, 0.0, [1.0, 0.0], 1.0, config, stats=full)
    assert masked.accepted < full.accepted


def test_step_budget_is_enforced():
    config = IntegratorConfig(rtol=1e-12, atol=1e-14, max_steps=3)
    with pytest.raises(IntegrationError):
        dormand_prince(lambda t, y: np.cos(40.0 * t) * np.ones(1), 0.0, [0.0], 10.0, config)


def test_nonfinite_right_hand_side():
    with pytest.raises(IntegrationError):
        dormand_prince(lambda t, y: np.array([np.nan]), 0.0, [1.0], 1.0, IntegratorConfig())


def test_numerical_errors_in_rhs_become_integration_errors():
    def fun(t, y):
        raise SlowAngleError("too slow")
    with pytest.raises(IntegrationError):
        dormand_prince(fun, 0.0, [1.0], 1.0, IntegratorConfig())


def test_config_validation():
    with pytest.raises(ConfigurationError):
        IntegratorConfig(rtol=0.0)
    with pytest.raises(ConfigurationError):
        IntegratorConfig(method="rk4")
