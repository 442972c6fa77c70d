"""
Root finding for PoissonOrbits
Multistart Newton for simple zeros of the averaged map, stability labels,
and the small-amplitude scan near r = 0

Newton runs from every node of a user grid; converged points are
deduplicated in a sorted post-pass so the result does not depend on the
order in which (possibly parallel) starts finish. Stability follows from
the Routh-Hurwitz table of the Jacobian's characteristic polynomial.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .averaging import AveragedMap
from .errors import ConfigurationError, NumericalError
from .reduction import DarbouxChart, invert_chart

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]
ValueAndJacobian = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]

ROUTH_TOL = 1e-9
ROUTH_EPS = 1e-7
DOMAIN_ANGLES = 8
RECHECK_FACTOR = 10.0


class Stability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class NewtonSettings:
    """Engineering constants of the multistart search (all logged in reports)."""
    tol: float = 1e-10
    max_iter: int = 50
    dedup_radius: float = 1e-6
    det_rel_tol: float = 1e-8
    zero_field_tol: float = 1e-12
    max_halvings: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.tol <= 0 or self.dedup_radius <= 0 or self.det_rel_tol <= 0:
            raise ConfigurationError("Newton tolerances must be positive")
        if self.max_iter < 1 or self.workers < 1:
            raise ConfigurationError("max_iter and workers must be at least 1")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "newton_tol": self.tol,
            "max_iter": self.max_iter,
            "dedup_radius": self.dedup_radius,
            "det_rel_tol": self.det_rel_tol,
            "zero_field_tol": self.zero_field_tol,
        }


@dataclass(frozen=True)
class SearchBox:
    """
    Search region r in r_range, z_j in z_ranges[j], with grid node counts.

    `grid` may be a single int applied to every axis.
    """
    r_range: Interval
    z_ranges: Tuple[Interval, ...]
    grid: Any = 5

    def __post_init__(self):
        object.__setattr__(self, "r_range", tuple(float(v) for v in self.r_range))
        object.__setattr__(self, "z_ranges", tuple(tuple(float(v) for v in z) for z in self.z_ranges))
        axes = 1 + len(self.z_ranges)
        grid = (self.grid,) * axes if isinstance(self.grid, int) else tuple(int(g) for g in self.grid)
        object.__setattr__(self, "grid", grid)
        if len(grid) != axes:
            raise ConfigurationError(f"grid needs {axes} node counts, got {len(grid)}")
        if any(g < 2 for g in grid):
            raise ConfigurationError("grid counts must be at least 2")
        if self.r_range[0] <= 0:
            raise ConfigurationError("r_range lower bound must be positive")
        for lo, hi in self.ranges:
            if not lo < hi:
                raise ConfigurationError(f"Empty interval [{lo}, {hi}]")

    @property
    def ranges(self) -> Tuple[Interval, ...]:
        return (self.r_range,) + self.z_ranges

    def nodes(self) -> List[np.ndarray]:
        axes = [np.linspace(lo, hi, g) for (lo, hi), g in zip(self.ranges, self.grid)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return [np.array([m.flat[i] for m in mesh]) for i in range(mesh[0].size)]

    def contains(self, point: np.ndarray) -> bool:
        if not point[0] > self.r_range[0]:
            return False
        return all(lo - 1e-12 <= v <= hi + 1e-12 for v, (lo, hi) in zip(point, self.ranges))

    def allows(self, point: np.ndarray) -> bool:
        """Newton iterates may wander half a box width outside, never below r_lo / 2."""
        if not np.all(np.isfinite(point)) or point[0] < 0.5 * self.r_range[0]:
            return False
        for v, (lo, hi) in zip(point, self.ranges):
            margin = 0.5 * (hi - lo)
            if not lo - margin <= v <= hi + margin:
                return False
        return True

    def to_dict(self) -> Dict[str, Any]:
        return {"r_range": list(self.r_range), "z_ranges": [list(z) for z in self.z_ranges], "grid": list(self.grid)}


@dataclass(frozen=True)
class ZeroInfo:
    point: Tuple[float, ...]
    residual: float
    jacobian: Tuple[Tuple[float, ...], ...]
    simple: bool
    stability: Stability
    order: int
    in_domain: bool = True

    @property
    def r(self) -> float:
        return self.point[0]

    @property
    def z(self) -> Tuple[float, ...]:
        return self.point[1:]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "point": list(self.point),
            "residual": self.residual,
            "jacobian": [list(row) for row in self.jacobian],
            "simple": self.simple,
            "stability": self.stability.value,
            "order": self.order,
            "in_domain": self.in_domain,
        }


@dataclass
class SearchMetadata:
    box: Dict[str, Any]
    settings: Dict[str, Any]
    starts: int = 0
    converged: int = 0
    failed: int = 0
    left_box: int = 0
    outside_box: int = 0
    duplicates: int = 0
    recheck_rejected: int = 0
    identically_zero: bool = False
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class ZeroReport:
    zeros: List[ZeroInfo]
    metadata: SearchMetadata
    label: str = "gbar0"

    @property
    def simple_zeros(self) -> List[ZeroInfo]:
        return [z for z in self.zeros if z.simple]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "function": self.label,
            "zeros": [z.to_dict() for z in self.zeros],
            "simple_count": len(self.simple_zeros),
            "metadata": self.metadata.to_dict(),
        }


# Stability

def characteristic_polynomial(matrix: np.ndarray) -> np.ndarray:
    """Monic coefficients of det(lambda I - A), highest degree first (Faddeev-LeVerrier)."""
    A = np.asarray(matrix, dtype=float)
    n = A.shape[0]
    coefficients = np.zeros(n + 1)
    coefficients[0] = 1.0
    M = np.zeros_like(A)
    identity = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coefficients[k - 1] * identity
        coefficients[k] = -np.trace(A @ M) / k
    return coefficients


@dataclass(frozen=True)
class RouthColumn:
    """First column of a Routh table; `boundary` marks a zero pivot, zero row or zero root."""
    values: List[float]
    boundary: bool = False

    @property
    def sign_changes(self) -> int:
        return sum(1 for a, b in zip(self.values, self.values[1:]) if (a > 0) != (b > 0))


def routh_first_column(coefficients: Sequence[float], tol: float = ROUTH_TOL) -> RouthColumn:
    """
    Routh table of a polynomial given highest degree first.

    Zero roots are divided out first. A vanishing pivot is replaced by a
    small positive number; a row that vanishes entirely is replaced by the
    derivative of the auxiliary polynomial formed from the row above. The
    sign changes of the column then count the roots in the open right
    half-plane.
    """
    a = [float(c) for c in coefficients]
    boundary = False
    while len(a) > 1 and abs(a[-1]) <= tol:
        a.pop()
        boundary = True
    n = len(a) - 1
    if n == 0:
        return RouthColumn([a[0]], boundary)
    width = n // 2 + 1
    rows = [
        (a[0::2] + [0.0] * width)[:width],
        (a[1::2] + [0.0] * width)[:width],
    ]
    for i in range(1, n + 1):
        row = rows[i]
        if all(abs(v) <= tol for v in row):
            degree = n - i + 1
            row = [v * (degree - 2 * j) for j, v in enumerate(rows[i - 1])]
            boundary = True
        if abs(row[0]) <= tol:
            row = [ROUTH_EPS] + row[1:]
            boundary = True
        rows[i] = row
        if i < n:
            above = rows[i - 1]
            rows.append([
                (row[0] * above[j + 1] - above[0] * row[j + 1]) / row[0]
                for j in range(width - 1)
            ] + [0.0])
    return RouthColumn([row[0] for row in rows], boundary)


def classify_stability(jacobian: Any) -> Stability:
    """
    Sign of the real parts of the eigenvalues via Routh-Hurwitz.

    Args:
        jacobian: square matrix

    Returns:
        STABLE (all in the open left half-plane), UNSTABLE (one in the open
        right half-plane) or INDETERMINATE (none to the right, some on the
        imaginary axis within tolerance)
    """
    A = np.atleast_2d(np.asarray(jacobian, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ConfigurationError(f"Jacobian must be square, got {A.shape}")
    norm = float(np.linalg.norm(A))
    if norm == 0.0 or not math.isfinite(norm):
        return Stability.INDETERMINATE
    column = routh_first_column(characteristic_polynomial(A / norm))
    if column.sign_changes > 0:
        return Stability.UNSTABLE
    return Stability.INDETERMINATE if column.boundary else Stability.STABLE


def is_simple(jacobian: np.ndarray, det_rel_tol: float) -> bool:
    J = np.atleast_2d(jacobian)
    norm = float(np.linalg.norm(J))
    return abs(float(np.linalg.det(J))) > det_rel_tol * norm ** (J.shape[0] - 1) and norm > 0


# Multistart Newton

@dataclass
class _Outcome:
    status: str
    point: Optional[np.ndarray] = None
    value: Optional[np.ndarray] = None
    jacobian: Optional[np.ndarray] = None


def _newton_from(fun: ValueAndJacobian, start: np.ndarray, box: SearchBox, settings: NewtonSettings) -> _Outcome:
    x = np.array(start, dtype=float)
    try:
        f, J = fun(x)
    except NumericalError as e:
        logger.debug(f"Start {x} not evaluable: {e}")
        return _Outcome("failed")
    for iteration in range(settings.max_iter):
        norm = float(np.abs(f).max())
        if norm <= settings.tol:
            return _Outcome("converged", x, f, J)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return _Outcome("failed")
        if not np.all(np.isfinite(step)) or not box.allows(x + step):
            return _Outcome("left_box")
        t = 1.0
        for _ in range(settings.max_halvings):
            trial = x + t * step
            try:
                f_trial, J_trial = fun(trial)
            except NumericalError:
                t *= 0.5
                continue
            if float(np.abs(f_trial).max()) < norm:
                break
            t *= 0.5
        else:
            return _Outcome("failed")
        x, f, J = trial, f_trial, J_trial
        logger.debug(f"Newton iteration {iteration}: |f| = {float(np.abs(f).max()):.3e} at {x}")
    return _Outcome("failed")


def multistart_newton(fun: ValueAndJacobian, box: SearchBox, settings: NewtonSettings,
                      label: str = "gbar0", progress: bool = False) -> Tuple[List[_Outcome], SearchMetadata]:
    """Run Newton from every grid node; outcomes come back in grid order."""
    starts = box.nodes()
    metadata = SearchMetadata(box=box.to_dict(), settings=settings.to_dict(), starts=len(starts))

    values = []
    for start in starts:
        try:
            values.append(float(np.abs(fun(start)[0]).max()))
        except NumericalError:
            values.append(math.inf)
    if values and max(values) < settings.zero_field_tol:
        metadata.identically_zero = True
        metadata.note = f"{label} identically zero at tolerance; Newton not applicable, use order 2"
        logger.info(f"{label} is identically zero on all {len(starts)} grid nodes")
        return [], metadata

    run = lambda start: _newton_from(fun, start, box, settings)
    bar = dict(total=len(starts), desc=f"{label} starts", disable=not progress, leave=False)
    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            outcomes = list(tqdm(pool.map(run, starts), **bar))
    else:
        outcomes = [run(start) for start in tqdm(starts, **bar)]

    for outcome in outcomes:
        if outcome.status == "converged":
            metadata.converged += 1
        elif outcome.status == "left_box":
            metadata.left_box += 1
        else:
            metadata.failed += 1
    return outcomes, metadata


def _deduplicate(points: List[Tuple[np.ndarray, np.ndarray, np.ndarray]], radius: float):
    kept = []
    duplicates = 0
    for point, value, jacobian in sorted(points, key=lambda item: tuple(item[0])):
        if any(np.linalg.norm(point - other) <= radius for other, _, _ in kept):
            duplicates += 1
            continue
        kept.append((point, value, jacobian))
    return kept, duplicates


def back_maps_into_domain(chart: DarbouxChart, point: Sequence[float]) -> bool:
    """True when the circle over (r, z) pulls back into U."""
    r, z = float(point[0]), [float(v) for v in point[1:]]
    theta = 2.0 * math.pi * np.arange(DOMAIN_ANGLES) / DOMAIN_ANGLES
    y = [r * np.cos(theta), r * np.sin(theta)] + [np.full(DOMAIN_ANGLES, v) for v in z]
    try:
        return bool(np.all(chart.contains(list(invert_chart(chart, y)))))
    except NumericalError:
        return False


def doubled_node_residual(averaged: AveragedMap, point: Sequence[float]) -> float:
    """Max |averaged map| at point, starting the quadrature from twice the nodes."""
    finer = replace(averaged, config=replace(averaged.config, nodes=2 * averaged.config.nodes))
    try:
        return float(np.abs(finer.evaluate(float(point[0]), [float(v) for v in point[1:]])).max())
    except NumericalError as e:
        logger.warning(f"Doubled-node re-evaluation failed at {list(point)}: {str(e)}")
        return math.inf


def find_zeros(averaged: AveragedMap, box: SearchBox, settings: Optional[NewtonSettings] = None,
               progress: bool = False) -> ZeroReport:
    """
    Locate zeros of the averaged map inside `box`.

    Converged points are deduplicated, tested for simplicity and labelled
    with a stability class. Zeros at r <= r_range.lower or outside the box
    are discarded and counted in the metadata, as are zeros whose residual
    under doubled quadrature nodes exceeds RECHECK_FACTOR * tol.
    """
    settings = settings or NewtonSettings()
    if len(box.z_ranges) != averaged.dim - 1:
        raise ConfigurationError(f"Search box needs {averaged.dim - 1} z-ranges, got {len(box.z_ranges)}")

    fun = lambda p: averaged.value_and_jacobian(p[0], p[1:])
    outcomes, metadata = multistart_newton(fun, box, settings, averaged.label, progress)

    inside = []
    for outcome in outcomes:
        if outcome.status != "converged":
            continue
        if box.contains(outcome.point):
            inside.append((outcome.point, outcome.value, outcome.jacobian))
        else:
            metadata.outside_box += 1
    kept, metadata.duplicates = _deduplicate(inside, settings.dedup_radius)

    zeros = []
    for point, value, jacobian in kept:
        recheck = doubled_node_residual(averaged, point)
        if recheck > RECHECK_FACTOR * settings.tol:
            metadata.recheck_rejected += 1
            logger.warning(f"Dropping zero at {point.tolist()}: residual {recheck:.3e} with doubled nodes "
                           f"exceeds {RECHECK_FACTOR * settings.tol:.3e}")
            continue
        simple = is_simple(jacobian, settings.det_rel_tol)
        stability = classify_stability(jacobian) if simple else Stability.INDETERMINATE
        in_domain = back_maps_into_domain(averaged.sf.chart, point)
        if not in_domain:
            logger.warning(f"Zero at {point.tolist()} does not pull back into the chart domain")
        zeros.append(ZeroInfo(
            point=tuple(float(v) for v in point),
            residual=float(np.abs(value).max()),
            jacobian=tuple(tuple(float(v) for v in row) for row in np.atleast_2d(jacobian)),
            simple=simple,
            stability=stability,
            order=averaged.order,
            in_domain=in_domain,
        ))
        logger.info(f"Zero of {averaged.label} at {[round(v, 10) for v in point]}: "
                    f"{'simple' if simple else 'non-simple'}, {stability.value}")
    logger.info(f"find_zeros: {len(zeros)} zero(s) from {metadata.starts} starts "
                f"({metadata.converged} converged, {metadata.failed} failed, {metadata.left_box} left box)")
    return ZeroReport(zeros, metadata, averaged.label)


# Small-amplitude scan near the origin

@dataclass
class SmallAmplitudeReport:
    leading_powers: Tuple[int, ...]
    radii: Tuple[float, ...]
    samples: List[List[float]]
    estimates: List[float]
    extrapolation_converged: bool
    zero_count: int
    zeros: List[Tuple[float, ...]]
    identically_zero: bool
    z_center: Tuple[float, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "leading_powers": list(self.leading_powers),
            "radii": list(self.radii),
            "samples": self.samples,
            "estimates": self.estimates,
            "extrapolation_converged": self.extrapolation_converged,
            "zero_count": self.zero_count,
            "zeros": [list(z) for z in self.zeros],
            "identically_zero": self.identically_zero,
            "z_center": list(self.z_center),
        }


def richardson_to_zero(values: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Extrapolate f(0) from f(h), f(h/2), f(h/4) assuming f = f0 + a h + b h^2.

    Returns (estimate, last first-stage estimate) so callers can judge
    convergence from their difference.
    """
    f0, f1, f2 = (np.asarray(v, dtype=float) for v in values)
    first_a = 2.0 * f1 - f0
    first_b = 2.0 * f2 - f1
    return (4.0 * first_b - first_a) / 3.0, first_b


def local_small_amplitude_scan(averaged: AveragedMap, r_max: float = 0.3,
                               z_box: Optional[Sequence[Interval]] = None,
                               leading_powers: Optional[Sequence[int]] = None,
                               grid: Any = (6, 5), settings: Optional[NewtonSettings] = None,
                               extrapolation_tol: float = 1e-2) -> SmallAmplitudeReport:
    """
    Study gbar0 near (r, z) = (0, 0) after dividing out known powers of r.

    The reduced map g_hat = gbar0 / r^p is extrapolated to r = 0 at the
    center of `z_box` (z = 0 when it lies in the box) and its zeros in
    (r_max / 16, r_max] x z_box are counted.
    """
    if r_max <= 0:
        raise ConfigurationError("r_max must be positive")
    dim = averaged.dim
    z_box = tuple(tuple(b) for b in (z_box or [(-0.3, 0.3)] * (dim - 1)))
    powers = tuple(int(p) for p in (leading_powers or (0,) * dim))
    if len(powers) != dim:
        raise ConfigurationError(f"leading_powers needs {dim} entries")
    z_center = tuple(0.0 if lo <= 0.0 <= hi else 0.5 * (lo + hi) for lo, hi in z_box)
    settings = settings or NewtonSettings()
    exponents = np.array(powers, dtype=float)

    def reduced(point: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r = float(point[0])
        value, jacobian = averaged.gbar0_value_and_jacobian(r, point[1:])
        scale = r ** -exponents
        g_hat = value * scale
        J_hat = jacobian * scale[:, None]
        J_hat[:, 0] -= exponents * value * scale / r
        return g_hat, J_hat

    radii = (r_max, r_max / 2.0, r_max / 4.0)
    samples = [averaged.gbar0(r, z_center) * r ** -exponents for r in radii]
    estimate, first_stage = richardson_to_zero(samples)
    converged = bool(np.all(np.abs(estimate - first_stage) <= extrapolation_tol * np.maximum(1.0, np.abs(estimate))))
    if not converged:
        logger.warning(f"Small-amplitude extrapolation not converged: {estimate.tolist()} vs {first_stage.tolist()}")

    box = SearchBox((r_max / 16.0, r_max), z_box, grid)
    outcomes, metadata = multistart_newton(reduced, box, settings, "g_hat")
    found = [(o.point, o.value, o.jacobian) for o in outcomes
             if o.status == "converged" and box.contains(o.point) and is_simple(o.jacobian, settings.det_rel_tol)]
    kept, _ = _deduplicate(found, settings.dedup_radius)

    report = SmallAmplitudeReport(
        leading_powers=powers,
        radii=radii,
        samples=[s.tolist() for s in samples],
        estimates=estimate.tolist(),
        extrapolation_converged=converged,
        zero_count=len(kept),
        zeros=[tuple(float(v) for v in p) for p, _, _ in kept],
        identically_zero=metadata.identically_zero,
        z_center=z_center,
    )
    logger.info(f"Small-amplitude scan: g_hat(0, z0) ~ {[round(v, 8) for v in report.estimates]}, "
                f"{report.zero_count} zero(s)")
    return report
