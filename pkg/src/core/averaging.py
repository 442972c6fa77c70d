"""
Averaging for PoissonOrbits
First- and second-order bifurcation functions by periodic quadrature

gbar0(r, z) is the theta-average of g0; rho_bar(r, z) is the average of
rho = D_(r,z) g0 . int_0^theta g0 + g1. Both use the composite trapezoid
rule on uniform nodes with node doubling until successive averages agree.
The inner antiderivative comes from the discrete Fourier coefficients of
the same samples, with the mean contributing the linear part.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, OrderGateError, QuadratureError
from .jets import Jet1, new_tag, partials_at, value_at
from .reduction import StandardForm

logger = logging.getLogger(__name__)

ZERO_GATE_TOL = 1e-9
FD_STEP = 1e-5
DEFAULT_PROBE_BOX = ((0.1, 1.0), (-0.5, 0.5))
PROBE_COUNT = 5


@dataclass(frozen=True)
class QuadratureConfig:
    nodes: int = 256
    tol: float = 1e-10
    max_doublings: int = 6

    def __post_init__(self):
        if self.nodes < 8 or self.nodes & (self.nodes - 1):
            raise ConfigurationError(f"nodes must be a power of two >= 8, got {self.nodes}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if self.max_doublings < 1:
            raise ConfigurationError("max_doublings must be at least 1")


def theta_nodes(count: int, offset: float = 0.0) -> np.ndarray:
    return 2.0 * math.pi * (np.arange(count) + offset) / count


class FourierAntiderivative:
    """
    theta -> int_0^theta f(s) ds for f given by samples on uniform nodes.

    Nonconstant modes are integrated termwise; the mean gives the linear
    part. Exact for trigonometric polynomials below the Nyquist mode.
    """

    def __init__(self, samples: np.ndarray):
        samples = np.asarray(samples, dtype=float)
        count = samples.shape[-1]
        if count < 2:
            raise ConfigurationError("Need at least two samples for a Fourier antiderivative")
        coefficients = np.fft.rfft(samples, axis=-1) / count
        self.count = count
        self.mean = coefficients[..., 0].real
        self._modes = np.arange(1, coefficients.shape[-1])
        weights = np.full(self._modes.shape, 2.0)
        if count % 2 == 0 and weights.size:
            weights[-1] = 1.0  # Nyquist mode appears once
        self._weighted = coefficients[..., 1:] * weights

    def periodic_part(self, theta: Any) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        flat = np.atleast_1d(theta)
        k = self._modes[:, None]
        integrals = (np.exp(1j * k * flat) - 1.0) / (1j * k)
        out = np.real(np.tensordot(self._weighted, integrals, axes=([-1], [0])))
        return out[..., 0] if theta.ndim == 0 else out

    def __call__(self, theta: Any) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        linear = np.multiply.outer(self.mean, theta)
        return linear + self.periodic_part(theta)

    def at_nodes(self) -> np.ndarray:
        return self(theta_nodes(self.count))

    def theta_weighted_mean(self) -> np.ndarray:
        """(1/2pi) int_0^2pi theta f(theta) dtheta for the sampled f."""
        k = self._modes
        return math.pi * self.mean + np.sum(self._weighted.imag / k, axis=-1)


def fourier_antiderivative(samples: np.ndarray) -> FourierAntiderivative:
    return FourierAntiderivative(samples)


def _refine(sample: Callable[[np.ndarray], np.ndarray], config: QuadratureConfig,
            combine: Callable[[np.ndarray], np.ndarray], where: Any) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluate `sample` on doubling node sets, reusing earlier nodes.

    `combine` maps the interleaved samples (..., N) to the averaged quantity.
    Returns (converged value, samples at the final node count).
    """
    count = config.nodes
    samples = sample(theta_nodes(count))
    value = combine(samples)
    delta = math.inf
    for _ in range(config.max_doublings):
        odd = sample(theta_nodes(count, 0.5))
        merged = np.empty(samples.shape[:-1] + (2 * count,))
        merged[..., 0::2] = samples
        merged[..., 1::2] = odd
        samples, count = merged, 2 * count
        refined = combine(samples)
        delta = float(np.abs(refined - value).max())
        scale = max(1.0, float(np.abs(refined).max()))
        value = refined
        if delta <= config.tol * scale:
            return value, samples
    raise QuadratureError(f"Averaging did not converge with {count} nodes", delta, location=where)


@dataclass(frozen=True)
class AveragedMap:
    """
    Quadrature-backed bifurcation function of order 1 (gbar0) or 2 (rho_bar).

    Attributes:
        sf: standard form being averaged
        config: quadrature settings
        order: 1 or 2
        probe_box: (r_range, z_range) used by the order-2 gate
    """
    sf: StandardForm
    config: QuadratureConfig = field(default_factory=QuadratureConfig)
    order: int = 1
    probe_box: Tuple[Tuple[float, float], ...] = DEFAULT_PROBE_BOX

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ConfigurationError(f"order must be 1 or 2, got {self.order}")

    @property
    def dim(self) -> int:
        return self.sf.dim

    @property
    def label(self) -> str:
        return "gbar0" if self.order == 1 else "rho_bar"

    # Sampling

    def _plain_samples(self, r: float, z: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
        def sample(thetas: np.ndarray) -> np.ndarray:
            out = self.sf.G(thetas, float(r), [float(v) for v in z], 0.0)
            return np.array([np.broadcast_to(np.asarray(g, dtype=float), thetas.shape) for g in out])
        return sample

    def _seeded_samples(self, r: float, z: Sequence[float], with_eps: bool) -> Callable[[np.ndarray], np.ndarray]:
        """Samples stacked as (n-1, 1 + seeds, N): value, d/dr, d/dz..., [d/deps]."""
        n1 = self.dim
        seeds = n1 + (1 if with_eps else 0)

        def sample(thetas: np.ndarray) -> np.ndarray:
            tag = new_tag()
            unit = lambda i: [1.0 if j == i else 0.0 for j in range(seeds)]
            r_jet = Jet1(float(r), unit(0), tag)
            z_jets = [Jet1(float(v), unit(i + 1), tag) for i, v in enumerate(z)]
            eps = Jet1(0.0, unit(n1), tag) if with_eps else 0.0
            out = self.sf.G(thetas, r_jet, z_jets, eps)
            stacked = np.empty((n1, 1 + seeds, thetas.size))
            for i, g in enumerate(out):
                stacked[i, 0] = np.broadcast_to(np.asarray(value_at(g, tag), dtype=float), thetas.shape)
                for k, p in enumerate(partials_at(g, tag, seeds)):
                    stacked[i, 1 + k] = np.broadcast_to(np.asarray(p, dtype=float), thetas.shape)
            return stacked
        return sample

    # First order

    def gbar0(self, r: float, z: Sequence[float]) -> np.ndarray:
        value, _ = _refine(self._plain_samples(r, z), self.config,
                           lambda s: s.mean(axis=-1), {"r": r, "z": list(z)})
        return value

    def gbar0_value_and_jacobian(self, r: float, z: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        value, _ = _refine(self._seeded_samples(r, z, with_eps=False), self.config,
                           lambda s: s.mean(axis=-1), {"r": r, "z": list(z)})
        return value[:, 0], value[:, 1:]

    def inner_antiderivative(self, r: float, z: Sequence[float]) -> FourierAntiderivative:
        _, samples = _refine(self._plain_samples(r, z), self.config,
                             lambda s: s.mean(axis=-1), {"r": r, "z": list(z)})
        return FourierAntiderivative(samples)

    # Second order

    def rho_bar(self, r: float, z: Sequence[float]) -> np.ndarray:
        n1 = self.dim

        def combine(samples: np.ndarray) -> np.ndarray:
            g0 = samples[:, 0]
            D = samples[:, 1:1 + n1]
            g1 = samples[:, 1 + n1]
            antiderivative = FourierAntiderivative(g0)
            periodic = antiderivative.periodic_part(theta_nodes(g0.shape[-1]))
            rho_periodic = np.einsum("ijk,jk->ik", D, periodic) + g1
            # the linear part mean*theta is averaged exactly
            linear = FourierAntiderivative(D).theta_weighted_mean() @ antiderivative.mean
            return rho_periodic.mean(axis=-1) + linear

        value, _ = _refine(self._seeded_samples(r, z, with_eps=True), self.config,
                           combine, {"r": r, "z": list(z)})
        return value

    def rho_bar_jacobian(self, r: float, z: Sequence[float]) -> np.ndarray:
        """Central differences of rho_bar in (r, z)."""
        point = np.array([r] + list(z), dtype=float)
        columns = []
        for i in range(point.size):
            step = FD_STEP * max(1.0, abs(point[i]))
            up, down = point.copy(), point.copy()
            up[i] += step
            down[i] -= step
            columns.append((self.rho_bar(up[0], up[1:]) - self.rho_bar(down[0], down[1:])) / (2.0 * step))
        return np.array(columns).T

    # Order-2 gate

    @cached_property
    def gate(self) -> "GateResult":
        return zero_gate(self, self.probe_box)

    def _require_gate(self) -> None:
        if self.order == 2 and not self.gate.passed:
            raise OrderGateError(
                f"gbar0 is not identically zero (max {self.gate.max_norm:.3e} > {ZERO_GATE_TOL:g}); "
                "second-order averaging does not apply",
                location={"r": self.gate.worst_point[0], "z": list(self.gate.worst_point[1:])},
            )

    # Uniform interface for root finding

    def evaluate(self, r: float, z: Sequence[float]) -> np.ndarray:
        if self.order == 1:
            return self.gbar0(r, z)
        self._require_gate()
        return self.rho_bar(r, z)

    def jacobian(self, r: float, z: Sequence[float]) -> np.ndarray:
        if self.order == 1:
            return self.gbar0_value_and_jacobian(r, z)[1]
        self._require_gate()
        return self.rho_bar_jacobian(r, z)

    def value_and_jacobian(self, r: float, z: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        if self.order == 1:
            return self.gbar0_value_and_jacobian(r, z)
        self._require_gate()
        return self.rho_bar(r, z), self.rho_bar_jacobian(r, z)


@dataclass(frozen=True)
class GateResult:
    passed: bool
    max_norm: float
    worst_point: Tuple[float, ...]
    probes: int
    tolerance: float = ZERO_GATE_TOL

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_norm": self.max_norm,
            "worst_point": list(self.worst_point),
            "probes": self.probes,
            "tolerance": self.tolerance,
            "policy": f"max |gbar0| over a {PROBE_COUNT}-per-axis probe grid below tolerance",
        }


def probe_grid(box: Sequence[Tuple[float, float]], count: int = PROBE_COUNT) -> List[Tuple[float, ...]]:
    axes = [np.linspace(lo, hi, count) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return [tuple(float(m.flat[i]) for m in mesh) for i in range(mesh[0].size)]


def zero_gate(averaged: AveragedMap, box: Sequence[Tuple[float, float]]) -> GateResult:
    """Certify gbar0 == 0 at tolerance on a probe grid."""
    box = list(box)
    if len(box) == 2 and averaged.dim > 2:
        box = box + [box[1]] * (averaged.dim - 2)
    worst, worst_point = 0.0, tuple(p[0] for p in box)
    points = probe_grid(box)
    for point in points:
        value = float(np.abs(averaged.gbar0(point[0], point[1:])).max())
        if value > worst:
            worst, worst_point = value, point
    result = GateResult(worst < ZERO_GATE_TOL, worst, worst_point, len(points))
    logger.info(f"Order-2 gate: max |gbar0| = {worst:.3e} over {len(points)} probes "
                f"({'passed' if result.passed else 'failed'})")
    return result


def gbar0(averaged: AveragedMap, r: float, z: Sequence[float]) -> np.ndarray:
    """Theta-average of g0 at (r, z)."""
    return averaged.gbar0(r, z)


def inner_antiderivative(averaged: AveragedMap, r: float, z: Sequence[float]) -> FourierAntiderivative:
    return averaged.inner_antiderivative(r, z)


def rho_bar(averaged: AveragedMap, r: float, z: Sequence[float]) -> np.ndarray:
    """Theta-average of rho = D g0 . int g0 + g1 at (r, z)."""
    return averaged.rho_bar(r, z)


def gbar0_jacobian(averaged: AveragedMap, r: float, z: Sequence[float]) -> np.ndarray:
    """D_(r,z) gbar0 by averaging (r, z)-seeded jets."""
    return averaged.gbar0_value_and_jacobian(r, z)[1]
