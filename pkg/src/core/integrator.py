"""
Runge-Kutta integration for PoissonOrbits
Dormand-Prince 5(4) with PI step-size control

Seven stages with the first-same-as-last property; the embedded fourth
order solution gives the local error estimate. An optional mask restricts
error control to a subset of the state (for example the orbit itself,
excluding variational components).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, IntegrationError, NumericalError

logger = logging.getLogger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]

# Butcher tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between fifth and fourth order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

SAFETY = 0.9
FACTOR_MIN = 0.2
FACTOR_MAX = 5.0
ALPHA = 0.7 / 5
BETA = 0.4 / 5


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 100000
    method: str = "dopri5"
    initial_step: Optional[float] = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigurationError("Integrator tolerances must be positive")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be at least 1")
        if self.method != "dopri5":
            raise ConfigurationError(f"Unknown integration method '{self.method}'")

    def to_dict(self) -> dict:
        return {"rtol": self.rtol, "atol": self.atol, "max_steps": self.max_steps, "method": self.method}


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    last_step: float = 0.0

    def absorb(self, other: "StepStats") -> None:
        self.accepted += other.accepted
        self.rejected += other.rejected
        self.evaluations += other.evaluations
        self.last_step = other.last_step


def dormand_prince(fun: RHS, t0: float, y0: Sequence[float], t1: float, config: IntegratorConfig,
                   error_mask: Optional[np.ndarray] = None, h0: Optional[float] = None,
                   stats: Optional[StepStats] = None) -> np.ndarray:
    """
    Integrate y' = fun(t, y) from t0 to t1 (either direction).

    Args:
        fun: right-hand side returning an array like y
        t0, t1: interval end points
        y0: initial state
        config: tolerances and step budget
        error_mask: boolean array selecting components under error control
        h0: first trial step magnitude
        stats: optional counters updated in place

    Returns:
        state at t1
    """
    y = np.array(y0, dtype=float)
    span = t1 - t0
    if span == 0.0:
        return y
    direction = math.copysign(1.0, span)
    mask = np.ones_like(y, dtype=bool) if error_mask is None else np.asarray(error_mask, dtype=bool)
    stats = stats if stats is not None else StepStats()

    t = t0
    h = abs(h0 or config.initial_step or abs(span) / 16.0)
    h = min(h, abs(span))
    h_floor = 1e-14 * max(1.0, abs(t0), abs(t1))
    error_previous = 1.0
    k = np.empty((7,) + y.shape)
    k[0] = _call(fun, t, y, stats)

    for _ in range(config.max_steps):
        remaining = abs(t1 - t)
        last = h >= remaining
        if last:
            h = remaining
        step = direction * h
        for i in range(1, 7):
            stage = y + step * np.tensordot(_A[i], k[:i], axes=1)
            k[i] = _call(fun, t + _C[i] * step, stage, stats)
        y_new = y + step * np.tensordot(_B, k, axes=1)
        error_vector = step * np.tensordot(_E, k, axes=1)
        scale = config.atol + config.rtol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = (error_vector / scale)[mask]
        error = float(np.sqrt(np.mean(ratio * ratio))) if ratio.size else 0.0

        if not math.isfinite(error):
            factor = FACTOR_MIN
        elif error <= 1.0:
            t = t1 if last else t + step
            y = y_new
            k[0] = k[6]
            stats.accepted += 1
            stats.last_step = h
            if last:
                return y
            if error == 0.0:
                factor = FACTOR_MAX
            else:
                factor = SAFETY * error ** -ALPHA * error_previous ** BETA
                factor = min(FACTOR_MAX, max(FACTOR_MIN, factor))
            error_previous = max(error, 1e-4)
            h *= factor
            continue
        else:
            factor = max(FACTOR_MIN, SAFETY * error ** (-1.0 / 5))
        stats.rejected += 1
        h *= min(factor, 1.0)
        if h < h_floor:
            raise IntegrationError(f"Step size underflow ({h:.3e})", location={"t": t})
    raise IntegrationError(f"Step budget of {config.max_steps} exhausted", location={"t": t})


def _call(fun: RHS, t: float, y: np.ndarray, stats: StepStats) -> np.ndarray:
    stats.evaluations += 1
    try:
        out = np.asarray(fun(t, y), dtype=float)
    except IntegrationError:
        raise
    except NumericalError as e:
        raise IntegrationError(f"Right-hand side failed: {e}", location={"t": t}) from e
    if not np.all(np.isfinite(out)):
        raise IntegrationError("Right-hand side returned non-finite values", location={"t": t})
    return out


def integrate_samples(fun: RHS, y0: Sequence[float], times: Sequence[float], config: IntegratorConfig,
                      error_mask: Optional[np.ndarray] = None, stats: Optional[StepStats] = None) -> np.ndarray:
    """States at every requested time, integrating segment by segment."""
    times = np.asarray(times, dtype=float)
    states = np.empty((times.size, len(y0)))
    states[0] = y0
    stats = stats if stats is not None else StepStats()
    h = config.initial_step
    for i in range(1, times.size):
        states[i] = dormand_prince(fun, times[i - 1], states[i - 1], times[i], config, error_mask, h, stats)
        h = stats.last_step or h
    return states
