"""
Errors for PoissonOrbits
Exception hierarchy shared by the library and the command line

Configuration problems (bad schemas, invalid specs, unknown scenarios) and
numerical failures (domain violations, non-convergence, guard trips) are
kept in separate families so the CLI can map them to distinct exit codes.
"""

from typing import Any, List, Optional, Sequence, Tuple

import numpy as np


class PoissonOrbitsError(Exception):
    """Base class for every error raised by PoissonOrbits."""


# Configuration family

class ConfigurationError(PoissonOrbitsError):
    """Invalid input: arity mismatch, malformed polynomial, bad parameters."""


class ConfigSchemaError(ConfigurationError):
    """
    A run configuration failed schema validation.

    Attributes:
        problems: list of (path, message) pairs, path in dotted/indexed form
    """

    def __init__(self, problems: Sequence[Tuple[str, str]]):
        self.problems: List[Tuple[str, str]] = list(problems)
        summary = "; ".join(f"{path}: {message}" for path, message in self.problems)
        super().__init__(f"Invalid configuration ({len(self.problems)} problem(s)): {summary}")

    def to_dict(self) -> dict:
        return {
            "error": "config_schema",
            "problems": [{"path": path, "message": message} for path, message in self.problems],
        }


class ScenarioError(ConfigurationError):
    """Unknown scenario name or scenario parameters that cannot be built."""


# Numerical family

class NumericalError(PoissonOrbitsError):
    """Base class for failures of a numerical procedure."""

    def __init__(self, message: str, location: Optional[Any] = None):
        self.location = location
        if location is not None:
            message = f"{message} (at {_format_location(location)})"
        super().__init__(message)


class DomainError(NumericalError):
    """A point lies outside the chart domain U (or where I vanishes)."""


class RankDegeneracyError(NumericalError):
    """The rescaling factor eta (or I*eta) vanished at a requested point."""


class DegenerateChartError(NumericalError):
    """DPhi is singular, so the inverse chart cannot be differentiated."""


class InversionError(NumericalError):
    """Newton inversion of the chart did not converge."""

    def __init__(self, message: str, residual: float, location: Optional[Any] = None):
        self.residual = residual
        super().__init__(f"{message}; last residual {residual:.3e}", location)


class PolarSingularityError(NumericalError):
    """r fell to or below r_min where the cylindrical change is undefined."""


class SlowAngleError(NumericalError):
    """|dtheta/dtau| dropped below the guard, so theta no longer acts as time."""


class QuadratureError(NumericalError):
    """Trapezoid averaging did not settle within the allowed doublings."""

    def __init__(self, message: str, last_delta: float, location: Optional[Any] = None):
        self.last_delta = last_delta
        super().__init__(f"{message}; last delta {last_delta:.3e}", location)


class OrderGateError(NumericalError):
    """Second-order averaging requested while gbar0 is not identically zero."""


class IntegrationError(NumericalError):
    """The Runge-Kutta integrator failed (step exhaustion, tiny step, guard trip)."""


def _format_location(location: Any) -> str:
    if isinstance(location, dict):
        return ", ".join(f"{key}={_format_location(value)}" for key, value in location.items())
    if isinstance(location, (list, tuple)):
        return "(" + ", ".join(_format_location(v) for v in location) + ")"
    if isinstance(location, float):
        return f"{location:.6g}"
    if isinstance(location, np.ndarray):
        return _format_location(location.tolist())
    if isinstance(location, np.floating):
        return f"{float(location):.6g}"
    return str(location)
