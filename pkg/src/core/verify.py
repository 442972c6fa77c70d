"""
Orbit verification for PoissonOrbits
Standard-form integration, Poincare shooting, continuation in eps, and
mapping orbits back to the original coordinates

Shooting solves P(v) = v for the 2 pi return map of the standard form
with Newton, where DP comes from integrating the variational equation
dS/dtheta = eps D_v G S alongside the orbit (D_v G from jets). Orbits are
mapped back through the polar change and Phi^{-1}; the original time is
reconstructed from dt/dtheta = 1 / (I eta dtheta/dtau).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DomainError, IntegrationError, NumericalError
from .integrator import IntegratorConfig, StepStats, dormand_prince, integrate_samples
from .jets import Jet1, base_value, new_tag, partials_at, value_at
from .poisson import PerturbedSpec
from .reduction import DarbouxChart, StandardForm, invert_chart

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ShootingSettings:
    tol: float = 1e-9
    max_iter: int = 20
    degenerate_tol: float = 1e-8
    step_tol: float = 1e-8
    max_halvings: int = 4
    divergence_factor: float = 10.0
    orbit_samples: int = 65

    def __post_init__(self):
        if self.tol <= 0 or self.degenerate_tol <= 0:
            raise ConfigurationError("Shooting tolerances must be positive")
        if self.orbit_samples < 2:
            raise ConfigurationError("orbit_samples must be at least 2")

    def to_dict(self) -> Dict[str, Any]:
        return {"shoot_tol": self.tol, "max_iter": self.max_iter, "degenerate_tol": self.degenerate_tol}


@dataclass
class Trajectory:
    thetas: np.ndarray
    states: np.ndarray
    epsilon: float
    times: Optional[np.ndarray] = None
    stats: StepStats = field(default_factory=StepStats)

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class OrbitSamples:
    thetas: np.ndarray
    x: np.ndarray
    times: Optional[np.ndarray]

    @property
    def closure_gap(self) -> float:
        return float(np.abs(self.x[-1] - self.x[0]).max())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": self.thetas.tolist(),
            "x": self.x.tolist(),
            "t": None if self.times is None else self.times.tolist(),
        }


def integrate_standard_form(sf: StandardForm, start: Sequence[float], eps: float,
                            theta_span: Tuple[float, float] = (0.0, TWO_PI),
                            config: Optional[IntegratorConfig] = None, samples: int = 65,
                            track_time: bool = True) -> Trajectory:
    """
    Integrate dv/dtheta = eps G(theta, v; eps) from `start`.

    Args:
        sf: standard form
        start: (r, z...) with r > r_min
        eps: perturbation size
        theta_span: (theta0, theta1)
        config: integrator settings
        samples: number of equally spaced output angles (endpoints included)
        track_time: also integrate the original time t (t = 0 at theta0)

    Returns:
        Trajectory with states of shape (samples, n - 1)
    """
    config = config or IntegratorConfig()
    start = np.asarray(start, dtype=float)
    n1 = sf.dim
    if start.size != n1:
        raise ConfigurationError(f"Start needs {n1} coordinates, got {start.size}")
    if start[0] <= sf.r_min:
        raise IntegrationError(f"Start radius {start[0]:g} <= r_min", location={"r": float(start[0])})

    def fun(theta: float, state: np.ndarray) -> np.ndarray:
        r, z = state[0], list(state[1:n1])
        G, angular, scale = sf.evaluate(theta, r, z, eps)
        out = [eps * float(base_value(g)) for g in G]
        if track_time:
            out.append(1.0 / float(base_value(scale * angular)))
        return np.array(out)

    thetas = np.linspace(theta_span[0], theta_span[1], samples)
    initial = np.concatenate([start, [0.0]]) if track_time else start
    stats = StepStats()
    states = integrate_samples(fun, initial, thetas, config, stats=stats)
    return Trajectory(
        thetas=thetas,
        states=states[:, :n1],
        epsilon=eps,
        times=states[:, n1] if track_time else None,
        stats=stats,
    )


def period_map(sf: StandardForm, v: Sequence[float], eps: float,
               config: Optional[IntegratorConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """2 pi return map P(v) and its Jacobian from the variational equation."""
    config = config or IntegratorConfig()
    n1 = sf.dim
    v = np.asarray(v, dtype=float)
    if v[0] <= sf.r_min:
        raise IntegrationError(f"Radius {v[0]:g} <= r_min", location={"r": float(v[0])})

    def fun(theta: float, state: np.ndarray) -> np.ndarray:
        tag = new_tag()
        jets = [Jet1(float(state[i]), [1.0 if j == i else 0.0 for j in range(n1)], tag) for i in range(n1)]
        G = sf.G(theta, jets[0], jets[1:], eps)
        values = np.array([float(base_value(value_at(g, tag))) for g in G])
        D = np.array([[float(base_value(p)) for p in partials_at(g, tag, n1)] for g in G])
        S = state[n1:].reshape(n1, n1)
        return np.concatenate([eps * values, (eps * (D @ S)).ravel()])

    initial = np.concatenate([v, np.eye(n1).ravel()])
    mask = np.zeros(initial.size, dtype=bool)
    mask[:n1] = True
    end = dormand_prince(fun, 0.0, initial, TWO_PI, config, error_mask=mask)
    return end[:n1], end[n1:].reshape(n1, n1)


@dataclass
class OrbitCertificate:
    """
    Outcome of one shooting run.

    status is one of converged, degenerate, no_orbit, trivial.
    """
    status: str
    epsilon: float
    fixed_point: Optional[Tuple[float, ...]] = None
    residual: Optional[float] = None
    predicted_zero: Optional[Tuple[float, ...]] = None
    distance: Optional[float] = None
    monodromy: Optional[np.ndarray] = None
    iterations: int = 0
    orbit: Optional[OrbitSamples] = None
    period_t: Optional[float] = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def floquet_multipliers(self) -> Optional[np.ndarray]:
        return None if self.monodromy is None else np.linalg.eigvals(self.monodromy)

    def to_dict(self, include_orbit: bool = True) -> Dict[str, Any]:
        multipliers = self.floquet_multipliers
        return {
            "status": self.status,
            "epsilon": self.epsilon,
            "fixed_point": None if self.fixed_point is None else list(self.fixed_point),
            "residual": self.residual,
            "predicted_zero": None if self.predicted_zero is None else list(self.predicted_zero),
            "distance": self.distance,
            "monodromy": None if self.monodromy is None else self.monodromy.tolist(),
            "floquet_moduli": None if multipliers is None else sorted(float(abs(m)) for m in multipliers),
            "iterations": self.iterations,
            "period_t": self.period_t,
            "orbit": self.orbit.to_dict() if (include_orbit and self.orbit is not None) else None,
            "message": self.message,
        }


def _smallest_singular_value(matrix: np.ndarray) -> float:
    return float(np.linalg.svd(matrix, compute_uv=False).min())


def poincare_shoot(sf: StandardForm, eps: float, guess: Sequence[float],
                   config: Optional[IntegratorConfig] = None,
                   settings: Optional[ShootingSettings] = None,
                   predicted: Optional[Sequence[float]] = None,
                   with_orbit: bool = True) -> OrbitCertificate:
    """
    Newton on P(v) - v for the 2 pi map of the standard form.

    A singular P' - I (smallest singular value below degenerate_tol) means
    a family of fixed points, reported as degenerate with no isolated orbit.
    """
    config = config or IntegratorConfig()
    settings = settings or ShootingSettings()
    predicted = tuple(float(v) for v in (predicted if predicted is not None else guess))
    n1 = sf.dim
    identity = np.eye(n1)

    def certificate(status: str, **kwargs) -> OrbitCertificate:
        cert = OrbitCertificate(status=status, epsilon=eps, predicted_zero=predicted, **kwargs)
        level = logging.INFO if status == "converged" else logging.WARNING
        logger.log(level, f"Shooting at eps={eps:g} from {list(np.round(guess, 8))}: {status} {cert.message}")
        return cert

    v = np.asarray(guess, dtype=float)
    try:
        Pv, M = period_map(sf, v, eps, config)
    except NumericalError as e:
        return certificate("no_orbit", message=str(e))

    for iteration in range(1, settings.max_iter + 1):
        residual_vector = Pv - v
        residual = float(np.abs(residual_vector).max())
        A = M - identity
        if _smallest_singular_value(A) <= settings.degenerate_tol * max(1.0, float(np.abs(M).max())):
            return certificate("degenerate", fixed_point=tuple(v), residual=residual, monodromy=M,
                               iterations=iteration,
                               message="P' - I is singular: a family of fixed points, no isolated orbit")
        step = np.linalg.solve(A, -residual_vector)
        if residual <= settings.tol and float(np.abs(step).max()) <= settings.step_tol * max(1.0, float(np.abs(v).max())):
            break
        if float(np.abs(step).max()) > settings.divergence_factor * max(1.0, float(np.abs(v).max())):
            return certificate("no_orbit", residual=residual, iterations=iteration, message="Newton diverged")

        t = 1.0
        for _ in range(settings.max_halvings + 1):
            trial = v + t * step
            if trial[0] > sf.r_min:
                try:
                    P_trial, M_trial = period_map(sf, trial, eps, config)
                    trial_residual = float(np.abs(P_trial - trial).max())
                    if trial_residual < residual or trial_residual <= settings.tol:
                        break
                except NumericalError as e:
                    logger.debug(f"Shooting trial at {trial} failed: {e}")
            t *= 0.5
        else:
            if v[0] <= 2.0 * sf.r_min:
                return certificate("trivial", fixed_point=tuple(v), residual=residual, iterations=iteration,
                                   message="iterate collapsed onto r = 0")
            return certificate("no_orbit", residual=residual, iterations=iteration,
                               message="no residual decrease along the Newton direction")
        v, Pv, M = trial, P_trial, M_trial
    else:
        residual = float(np.abs(Pv - v).max())
        if residual > settings.tol:
            return certificate("no_orbit", residual=residual, iterations=settings.max_iter,
                               message=f"no convergence in {settings.max_iter} iterations")

    residual = float(np.abs(Pv - v).max())
    if v[0] <= sf.r_min * 10.0:
        return certificate("trivial", fixed_point=tuple(v), residual=residual, iterations=iteration,
                           message="converged onto r = 0")
    fixed_point = tuple(float(c) for c in v)
    distance = float(np.linalg.norm(v - np.asarray(predicted)))

    orbit, period = None, None
    if with_orbit:
        try:
            trajectory = integrate_standard_form(sf, v, eps, config=config, samples=settings.orbit_samples)
            orbit = map_orbit_back(sf.chart, trajectory)
            period = abs(float(trajectory.times[-1] - trajectory.times[0]))
        except NumericalError as e:
            return certificate("no_orbit", fixed_point=fixed_point, residual=residual, monodromy=M,
                               iterations=iteration, message=f"orbit does not map back: {e}")
    return certificate("converged", fixed_point=fixed_point, residual=residual, distance=distance,
                       monodromy=M, iterations=iteration, orbit=orbit, period_t=period)


@dataclass
class ContinuationRow:
    epsilon: float
    certificate: OrbitCertificate

    def to_dict(self) -> Dict[str, Any]:
        cert = self.certificate
        return {
            "epsilon": self.epsilon,
            "status": cert.status,
            "fixed_point": None if cert.fixed_point is None else list(cert.fixed_point),
            "distance": cert.distance,
            "residual": cert.residual,
        }


@dataclass
class ContinuationTable:
    zero: Tuple[float, ...]
    rows: List[ContinuationRow]
    slope: Optional[float]
    flagged: bool
    truncated: bool
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "zero": list(self.zero),
            "rows": [row.to_dict() for row in self.rows],
            "slope": self.slope,
            "flagged": self.flagged,
            "truncated": self.truncated,
            "message": self.message,
        }


def fit_log_slope(epsilons: Sequence[float], distances: Sequence[float]) -> float:
    """Least-squares slope of log d against log eps."""
    return float(np.polyfit(np.log(epsilons), np.log(distances), 1)[0])


def continuation_in_epsilon(sf: StandardForm, zero: Sequence[float], eps_list: Sequence[float],
                            config: Optional[IntegratorConfig] = None,
                            settings: Optional[ShootingSettings] = None) -> ContinuationTable:
    """
    Shoot at decreasing eps, each run starting from the previous fixed point.

    A run ending in no_orbit or trivial truncates the table; degenerate
    runs are recorded and the next run restarts from the same guess.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ConfigurationError("eps_list must contain positive values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("eps_list must be strictly decreasing")
    zero = tuple(float(v) for v in zero)
    guess = zero
    rows: List[ContinuationRow] = []
    truncated = False
    for eps in eps_list:
        cert = poincare_shoot(sf, eps, guess, config, settings, predicted=zero, with_orbit=False)
        rows.append(ContinuationRow(eps, cert))
        if cert.converged:
            guess = cert.fixed_point
        elif cert.status != "degenerate":
            truncated = True
            break

    good = [(row.epsilon, row.certificate.distance) for row in rows
            if row.certificate.converged and row.certificate.distance and row.certificate.distance > 0]
    slope = fit_log_slope(*zip(*good)) if len(good) >= 2 else None
    flagged = truncated or slope is None or len(good) != len(rows)
    message = ""
    if slope is None:
        message = "slope undefined: fewer than two converged, nonzero distances"
    elif truncated:
        message = "table truncated by a failed shoot"
    logger.info(f"Continuation from {zero}: {len(rows)} row(s), slope={slope}")
    return ContinuationTable(zero, rows, slope, flagged, truncated, message)


def map_orbit_back(chart: DarbouxChart, trajectory: Trajectory) -> OrbitSamples:
    """
    Map (theta, r, z) samples to x = Phi^{-1}(r cos theta, r sin theta, z).

    Raises DomainError naming the first sample that leaves U.
    """
    thetas = np.asarray(trajectory.thetas, dtype=float)
    states = np.asarray(trajectory.states, dtype=float)
    r = states[:, 0]
    y = [r * np.cos(thetas), r * np.sin(thetas)] + [states[:, j] for j in range(1, states.shape[1])]
    try:
        x = invert_chart(chart, y)
    except DomainError:
        for i in range(thetas.size):
            try:
                invert_chart(chart, [float(c[i]) for c in y])
            except DomainError:
                raise DomainError("Orbit sample leaves the chart domain",
                                  location={"sample": i, "theta": float(thetas[i])}) from None
        raise
    inside = np.atleast_1d(chart.contains(list(x)))
    if not np.all(inside):
        i = int(np.argmin(inside))
        raise DomainError("Orbit sample leaves the chart domain", location={"sample": i, "theta": float(thetas[i])})
    return OrbitSamples(thetas=thetas, x=x.T.copy(), times=trajectory.times)


def reintegrate_original(perturbed: PerturbedSpec, x0: Sequence[float], duration: float, eps: float,
                         config: Optional[IntegratorConfig] = None) -> np.ndarray:
    """Integrate dx/dt = J grad H + eps F in the original coordinates."""
    config = config or IntegratorConfig()
    return dormand_prince(lambda t, x: perturbed.vector_field(x, eps), 0.0, x0, duration, config)
