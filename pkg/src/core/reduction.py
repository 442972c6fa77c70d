"""
Darboux reduction for PoissonOrbits
Chart Phi to Darboux coordinates, its inverse, the rescaling eta, and the
Lagrange standard form in cylindrical coordinates

Phi(x) = (x1 h1(x), x2 h2(x), D_3(x), ..., D_n(x)) maps the unperturbed
system to I * eta * J_D grad H*(y) with H* = (y1^2 + y2^2) / 2. The
perturbed system becomes dy/dtau = J_D grad H* + eps F*(y; eps) after the
time change dtau = I eta dt. Writing y = (r cos theta, r sin theta, z) and
using theta as the new time gives dr/dtheta, dz/dtheta = eps G(theta, r, z; eps).
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateChartError,
    DomainError,
    InversionError,
    PolarSingularityError,
    RankDegeneracyError,
    SlowAngleError,
)
from .jets import Jet1, base_value, dual_jacobian, new_tag, partials_at, top_tag, value_at
from .poisson import DEFAULT_SAMPLE_SEED, PerturbedSpec, PoissonSpec, sample_points

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
MAX_HALVINGS = 30
ETA_FLOOR = 1e-12
DEFAULT_R_MIN = 1e-6
DEFAULT_SLOW_ANGLE_MIN = 0.1


def _is_zero(v: Any) -> bool:
    return not isinstance(v, (Jet1, np.ndarray)) and v == 0


def _dot(row: Sequence[Any], vector: Sequence[Any]) -> Any:
    total: Any = 0.0
    for a, b in zip(row, vector):
        if _is_zero(a) or _is_zero(b):
            continue
        total = total + a * b
    return total


@dataclass(frozen=True)
class DarbouxChart:
    """
    Constructive Darboux chart of a PoissonSpec.

    Attributes:
        spec: the unperturbed system
        closed_inverse: optional y -> x evaluator (jet-capable)
        u_predicate: optional x -> bool (or bool array) membership test for U
        name: label for logs
    """
    spec: PoissonSpec
    closed_inverse: Optional[Callable[[Sequence[Any]], Sequence[Any]]] = None
    u_predicate: Optional[Callable[[Sequence[Any]], Any]] = None
    name: str = "chart"

    @property
    def n(self) -> int:
        return self.spec.n

    def phi_forward(self, x: Sequence[Any]) -> List[Any]:
        h1, h2 = self.spec.h
        y = [x[0] * h1(x), x[1] * h2(x)]
        y.extend(self.spec.casimir(j, x) for j in range(2, self.n))
        return y

    def forward_jacobian(self, x: Sequence[Any]) -> List[List[Any]]:
        """Rows of DPhi(x); entries carry the outer seeds of `x`."""
        return dual_jacobian(self.phi_forward, x)[1]

    def eta_from_rows(self, x: Sequence[Any], rows: Sequence[Sequence[Any]]) -> Any:
        """eta = grad(y1)^T J0(x) grad(y2)."""
        J0 = self.spec.J0(x)
        total: Any = 0.0
        for a, da in enumerate(rows[0]):
            if _is_zero(da):
                continue
            total = total + da * _dot(J0[a], rows[1])
        return total

    def contains(self, x: Sequence[Any]) -> Any:
        """Membership of (plain-valued) x in U as a bool or bool array."""
        # theta-vectorised points mix node arrays with constant coordinates
        values = list(np.broadcast_arrays(*[np.asarray(base_value(v), dtype=float) for v in x]))
        finite = np.logical_and.reduce([np.isfinite(v) for v in values])
        if self.u_predicate is None:
            return finite
        with np.errstate(invalid="ignore"):
            return np.logical_and(finite, self.u_predicate(values))

    def _require_domain(self, x: Sequence[Any], y: Sequence[Any]) -> None:
        inside = self.contains(x)
        if not np.all(inside):
            y_plain = [np.asarray(base_value(v), dtype=float) for v in y]
            bad = np.argwhere(~np.atleast_1d(np.asarray(inside)))
            index = tuple(bad[0]) if bad.size else ()
            location = [float(np.atleast_1d(v)[index] if np.ndim(v) else v) for v in y_plain]
            raise DomainError(f"Point left the chart domain of '{self.name}'", location={"y": location})

    def pull_back(self, y: Sequence[Any]) -> List[Any]:
        """x = Phi^{-1}(y) with derivatives along the seeds of y."""
        if self.closed_inverse is not None:
            try:
                with np.errstate(divide="ignore", invalid="ignore"):
                    x = list(self.closed_inverse(list(y)))
            except ZeroDivisionError:
                raise DomainError(
                    f"Closed-form inverse of '{self.name}' undefined",
                    location={"y": [float(np.max(base_value(v))) for v in y]},
                ) from None
            self._require_domain(x, y)
            return x
        return chart_inverse_jet(self, y)

    def eta(self, y: Sequence[Any]) -> Any:
        """Rescaling factor at plain-valued y; RankDegeneracyError where it vanishes."""
        x = invert_chart(self, y)
        rows = self.forward_jacobian(list(x))
        value = np.asarray(base_value(self.eta_from_rows(list(x), rows)), dtype=float)
        if np.any(np.abs(value) < ETA_FLOOR):
            raise RankDegeneracyError("eta vanishes", location={"y": np.asarray(y, dtype=float)})
        return value if value.ndim else float(value)


def build_chart(spec: PoissonSpec, closed_inverse: Optional[Callable] = None,
                u_predicate: Optional[Callable] = None, name: Optional[str] = None) -> DarbouxChart:
    """
    Build the Darboux chart and check DPhi(0) = I and eta(0) != 0.

    Args:
        spec: validated PoissonSpec
        closed_inverse: optional closed-form Phi^{-1}
        u_predicate: optional membership test for U

    Returns:
        DarbouxChart
    """
    chart = DarbouxChart(spec, closed_inverse, u_predicate, name or spec.name)
    origin = [0.0] * spec.n
    rows = np.array([[float(base_value(e)) for e in row] for row in chart.forward_jacobian(origin)])
    identity_error = float(np.abs(rows - np.eye(spec.n)).max())
    if identity_error > 1e-12:
        raise ConfigurationError(f"DPhi(0) differs from the identity by {identity_error:.3e}")
    eta0 = float(base_value(chart.eta_from_rows(origin, chart.forward_jacobian(origin))))
    if abs(eta0) < ETA_FLOOR:
        raise RankDegeneracyError("eta vanishes at the origin", location={"y": origin})
    logger.info(f"Built Darboux chart '{chart.name}' (n={spec.n}, eta(0)={eta0:g})")
    return chart


def _stack(y: Sequence[Any]) -> np.ndarray:
    parts = np.broadcast_arrays(*[np.asarray(base_value(v), dtype=float) for v in y])
    return np.array(parts)


def _forward_values(chart: DarbouxChart, x: np.ndarray) -> np.ndarray:
    return _stack(chart.phi_forward(list(x)))


def _jacobian_values(chart: DarbouxChart, x: np.ndarray) -> np.ndarray:
    """DPhi at plain points x of shape (n, *shape) -> array (*shape, n, n)."""
    n = chart.n
    shape = x.shape[1:]
    seeded = Jet1.variables(list(x))
    tag = seeded[0].tag
    out = chart.phi_forward(seeded)
    D = np.empty(shape + (n, n))
    for i in range(n):
        for k, p in enumerate(partials_at(out[i], tag, n)):
            D[..., i, k] = np.broadcast_to(np.asarray(p, dtype=float), shape)
    return D


def _solve(D: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched solve D @ s = rhs for rhs of shape (*shape, n, k)."""
    try:
        return np.linalg.solve(D, rhs)
    except np.linalg.LinAlgError:
        raise DegenerateChartError("DPhi is singular") from None


def newton_inverse(chart: DarbouxChart, y: Sequence[Any], guess: Optional[Sequence[Any]] = None,
                   tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> np.ndarray:
    """Damped Newton for Phi(x) = y, column-wise over array-valued y."""
    target = _stack(y)
    x = target.copy() if guess is None else np.broadcast_to(_stack(guess), target.shape).copy()
    residual = _forward_values(chart, x) - target
    norm = np.abs(residual).max(axis=0)
    for iteration in range(max_iter):
        done = norm <= tol
        if np.all(done):
            chart._require_domain(list(x), y)
            return x
        D = _jacobian_values(chart, x)
        step = np.moveaxis(_solve(D, np.moveaxis(residual, 0, -1)[..., None])[..., 0], -1, 0)
        t = np.ones_like(norm)
        for _ in range(MAX_HALVINGS):
            trial = x - t * step
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                trial_residual = _forward_values(chart, trial) - target
            trial_norm = np.abs(trial_residual).max(axis=0)
            better = done | (np.isfinite(trial_norm) & (trial_norm < norm))
            if np.all(better):
                break
            t = np.where(better, t, 0.5 * t)
        accept = better & ~done
        if not np.any(accept):
            raise InversionError("Chart inversion stalled", float(np.nanmax(norm)),
                                 location={"y": target.tolist()})
        x = np.where(accept, trial, x)
        residual = np.where(accept, trial_residual, residual)
        norm = np.where(accept, trial_norm, norm)
        chart._require_domain(list(x), y)
        logger.debug(f"Chart Newton iteration {iteration}: max residual {float(norm.max()):.3e}")
    if np.all(norm <= tol):
        return x
    raise InversionError(f"Chart inversion did not converge in {max_iter} iterations",
                         float(norm.max()), location={"y": target.tolist()})


def invert_chart(chart: DarbouxChart, y: Sequence[Any], guess: Optional[Sequence[Any]] = None) -> np.ndarray:
    """
    x = Phi^{-1}(y) at plain-valued y (floats or equally shaped arrays).

    Uses the closed form when the chart has one, otherwise damped Newton
    starting from `guess` (default y, since Phi = id + h.o.t.).
    """
    if chart.closed_inverse is not None:
        plain = [np.asarray(base_value(v), dtype=float) for v in y]
        x = chart.pull_back([v if v.ndim else float(v) for v in plain])
        return _stack(x)
    return newton_inverse(chart, y, guess)


def chart_inverse_jet(chart: DarbouxChart, y: Sequence[Any], seeds: Optional[Sequence[Sequence[float]]] = None) -> List[Any]:
    """
    Phi^{-1}(y) with partials from the implicit-function solve DPhi dx = dy.

    Args:
        chart: the chart
        y: coordinates, floats/arrays or jets of a single seed group
        seeds: optional (n, m) array; row i holds the seed partials of y_i

    Returns:
        list of Jet1 (or plain values when y carries no seeds)
    """
    n = chart.n
    if seeds is not None:
        seeds = np.asarray(seeds, dtype=float)
        if seeds.shape[0] != n:
            raise ConfigurationError(f"Seeds need {n} rows, got {seeds.shape[0]}")
        tag = new_tag()
        y = [Jet1(base_value(v), list(seeds[i]), tag) for i, v in enumerate(y)]
    tag = top_tag(y)
    if tag < 0:
        return list(newton_inverse(chart, y))
    values = [value_at(v, tag) for v in y]
    if top_tag(values) >= 0:
        raise ConfigurationError("chart_inverse_jet supports a single seed group")
    m = next(v.seeds for v in y if isinstance(v, Jet1) and v.tag == tag)
    x = newton_inverse(chart, values) if chart.closed_inverse is None else invert_chart(chart, values)
    shape = x.shape[1:]
    D = _jacobian_values(chart, x)
    det = np.abs(np.linalg.det(D))
    scale = np.maximum(np.abs(D).max(axis=(-2, -1)), 1.0) ** n
    if np.any(det < 1e-14 * scale):
        raise DegenerateChartError("DPhi is singular", location={"y": _stack(values).tolist()})
    dy = np.empty(shape + (n, m))
    for i, v in enumerate(y):
        for k, p in enumerate(partials_at(v, tag, m)):
            dy[..., i, k] = np.broadcast_to(np.asarray(p, dtype=float), shape)
    dx = _solve(D, dy)
    return [Jet1(x[i] if shape else float(x[i]), [dx[..., i, k] if shape else float(dx[i, k]) for k in range(m)], tag)
            for i in range(n)]


def transformed_perturbation(chart: DarbouxChart, perturbed: PerturbedSpec, y: Sequence[Any], eps: Any) -> List[Any]:
    """F*(y; eps) = DPhi(x) F(x; eps) / (I(x) eta) at x = Phi^{-1}(y)."""
    x = chart.pull_back(list(y))
    rows = chart.forward_jacobian(x)
    F = perturbed.evaluate_F(x, eps)
    scale = _scale(chart, perturbed, x, rows, y)
    return [_dot(row, F) / scale for row in rows]


def _scale(chart: DarbouxChart, perturbed: PerturbedSpec, x: Sequence[Any], rows: Sequence[Sequence[Any]], y: Sequence[Any]) -> Any:
    scale = perturbed.base.I(x) * chart.eta_from_rows(x, rows)
    if np.any(np.abs(np.asarray(base_value(scale), dtype=float)) < ETA_FLOOR):
        raise RankDegeneracyError("I * eta vanishes", location={"y": [np.asarray(base_value(v)).tolist() for v in y]})
    return scale


def reduced_vector_field(chart: DarbouxChart, perturbed: PerturbedSpec, y: Sequence[float], eps: float) -> np.ndarray:
    """J_D grad H*(y) + eps F*(y; eps) at a plain point."""
    y = [float(v) for v in y]
    flow = np.zeros(chart.n)
    flow[0], flow[1] = y[1], -y[0]
    if eps != 0.0:
        flow = flow + eps * np.array([float(base_value(f)) for f in transformed_perturbation(chart, perturbed, y, eps)])
    return flow


@dataclass(frozen=True)
class StandardForm:
    """
    Lagrange standard form dr/dtheta, dz/dtheta = eps G(theta, r, z; eps).

    G accepts jets for r, z and eps; theta is a float or an array of nodes.
    """
    chart: DarbouxChart
    perturbation: PerturbedSpec
    r_min: float = DEFAULT_R_MIN
    slow_angle_min: float = DEFAULT_SLOW_ANGLE_MIN

    @property
    def dim(self) -> int:
        return self.chart.n - 1

    def evaluate(self, theta: Any, r: Any, z: Sequence[Any], eps: Any) -> Tuple[List[Any], Any, Any]:
        """Return (G, dtheta/dtau, I*eta) at one (theta, r, z, eps)."""
        r_plain = np.asarray(base_value(r), dtype=float)
        if np.any(r_plain <= self.r_min):
            raise PolarSingularityError(f"r <= r_min = {self.r_min:g}", location={"r": float(r_plain.min())})
        if len(z) != self.chart.n - 2:
            raise ConfigurationError(f"Expected {self.chart.n - 2} z-coordinates, got {len(z)}")
        c, s = np.cos(theta), np.sin(theta)
        y = [r * c, r * s] + list(z)
        x = self.chart.pull_back(y)
        rows = self.chart.forward_jacobian(x)
        F = self.perturbation.evaluate_F(x, eps)
        scale = _scale(self.chart, self.perturbation, x, rows, y)
        f_star = [_dot(row, F) / scale for row in rows]
        G1 = c * f_star[0] + s * f_star[1]
        G2 = c * f_star[1] - s * f_star[0]
        angular = -1.0 + eps * G2 / r
        angular_plain = np.abs(np.asarray(base_value(angular), dtype=float))
        if np.any(angular_plain < self.slow_angle_min):
            raise SlowAngleError(
                f"|dtheta/dtau| = {float(angular_plain.min()):.3g} below {self.slow_angle_min:g}",
                location={"r": float(r_plain.max()), "z": [float(np.max(base_value(v))) for v in z]},
            )
        G = [G1 / angular] + [f / angular for f in f_star[2:]]
        return G, angular, scale

    def G(self, theta: Any, r: Any, z: Sequence[Any], eps: Any) -> List[Any]:
        return self.evaluate(theta, r, z, eps)[0]

    def rhs(self, theta: Any, r: Any, z: Sequence[Any], eps: float) -> List[Any]:
        """(dr/dtheta, dz/dtheta); the zero vector at eps = 0."""
        if eps == 0.0:
            return [0.0] * self.dim
        return [eps * g for g in self.G(theta, r, z, eps)]

    def jet_rhs(self, theta: Any, r: Any, z: Sequence[Any]) -> Tuple[List[Any], List[Any]]:
        """(g0, g1) from one eps-seeded evaluation at eps = 0."""
        eps = Jet1.variables([0.0])[0]
        out = self.G(theta, r, z, eps)
        g0 = [value_at(g, eps.tag) for g in out]
        g1 = [partials_at(g, eps.tag, 1)[0] for g in out]
        return g0, g1

    def time_rate(self, theta: Any, r: Any, z: Sequence[Any], eps: float) -> Any:
        """dt/dtheta = 1 / (I eta dtheta/dtau)."""
        _, angular, scale = self.evaluate(theta, r, z, eps)
        return 1.0 / (scale * angular)


def standard_form(chart: DarbouxChart, perturbed: PerturbedSpec, r_min: float = DEFAULT_R_MIN,
                  slow_angle_min: float = DEFAULT_SLOW_ANGLE_MIN) -> StandardForm:
    if perturbed.base.n != chart.n:
        raise ConfigurationError("Perturbation and chart belong to different systems")
    if r_min <= 0 or slow_angle_min <= 0:
        raise ConfigurationError("r_min and slow_angle_min must be positive")
    return StandardForm(chart, perturbed, r_min, slow_angle_min)


def defining_identity_residual(chart: DarbouxChart, perturbed: PerturbedSpec, x: Sequence[float], eps: float) -> float:
    """max |DPhi (J grad H + eps F) - I eta (J_D grad H* + eps F*)| at x."""
    x = [float(v) for v in x]
    rows = np.array([[float(base_value(e)) for e in row] for row in chart.forward_jacobian(x)])
    lhs = rows @ perturbed.vector_field(x, eps)
    y = [float(base_value(v)) for v in chart.phi_forward(x)]
    scale = float(base_value(perturbed.base.I(x) * chart.eta_from_rows(x, chart.forward_jacobian(x))))
    rhs = scale * reduced_vector_field(chart, perturbed, y, eps)
    return float(np.abs(lhs - rhs).max())


def chart_self_check(chart: DarbouxChart, sample_count: int = 100, seed: int = DEFAULT_SAMPLE_SEED) -> Dict[str, Any]:
    """
    Sampled chart diagnostics: DPhi(0) error, round trips, eta range.

    Samples outside U are skipped and counted.
    """
    n = chart.n
    rows = np.array([[float(base_value(e)) for e in row] for row in chart.forward_jacobian([0.0] * n)])
    points = sample_points(chart.spec, sample_count, seed).T
    inside = np.asarray(chart.contains(list(points)), dtype=bool)
    points = points[:, inside]
    y = _forward_values(chart, points)
    x_back = invert_chart(chart, list(y))
    round_trip = float(np.abs(x_back - points).max(initial=0.0))
    forward_residual = float(np.abs(_forward_values(chart, x_back) - y).max(initial=0.0))
    eta_values = np.abs(np.asarray(base_value(chart.eta_from_rows(list(points), chart.forward_jacobian(list(points))))))
    report = {
        "identity_error": float(np.abs(rows - np.eye(n)).max()),
        "round_trip_error": round_trip,
        "forward_residual": forward_residual,
        "eta_min_abs": float(np.min(eta_values, initial=np.inf)) if points.size else None,
        "samples": int(points.shape[1]),
        "skipped_outside_domain": int(sample_count - points.shape[1]),
    }
    logger.info(f"Chart '{chart.name}' round trip {round_trip:.2e} over {report['samples']} samples")
    return report
