"""
Poisson systems for PoissonOrbits
Unperturbed rank-2 Poisson systems, their perturbations, and validation

A PoissonSpec describes dx/dt = I(x) J0(x) grad H(x) with
H = (x1^2 h1^2 + x2^2 h2^2) / 2 and Casimirs D_j = x_j + phi_j. Validation
samples the domain hint and checks antisymmetry, rank, the Jacobi
identity, the Casimir property and conservation of H, using jet
derivatives of the structure-matrix entries.
"""

import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DomainError
from .fields import MatrixField, ScalarField, VectorField
from .jets import Jet1, base_value, dual_gradient, dual_jacobian, partials_at, value_at

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_SEED = 0x5EED
RANK_PIVOT_TOL = 1e-9
JACOBI_TOL = 1e-8
CASIMIR_TOL = 1e-8
ENERGY_TOL = 1e-10
ANTISYMMETRY_TOL = 1e-12
ORIGIN_TOL = 1e-12

Box = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class PoissonSpec:
    """
    Unperturbed Poisson system with a constant-rank-2 structure matrix.

    Attributes:
        n: dimension (>= 3)
        J0: rank-2 structure matrix field
        I: nonvanishing first integral multiplying J0
        h: Hamiltonian factors (h1, h2) with h1(0) = h2(0) = 1
        phi: Casimir offsets phi_3..phi_n, vanishing to second order at 0
        domain_hint: sampling box for Omega, default [-1, 1]^n
        name: label used in logs and reports
    """
    n: int
    J0: MatrixField
    I: ScalarField
    h: Tuple[ScalarField, ScalarField]
    phi: Tuple[ScalarField, ...]
    domain_hint: Optional[Box] = None
    name: str = "poisson"

    def __post_init__(self):
        if self.n < 3:
            raise ConfigurationError(f"Dimension must be at least 3, got {self.n}")
        if len(self.h) != 2:
            raise ConfigurationError("Exactly two Hamiltonian factors h1, h2 are required")
        if len(self.phi) != self.n - 2:
            raise ConfigurationError(f"Expected {self.n - 2} Casimir offsets, got {len(self.phi)}")
        if self.J0.size != self.n:
            raise ConfigurationError(f"J0 is {self.J0.size}x{self.J0.size}, expected {self.n}x{self.n}")
        if self.domain_hint is None:
            object.__setattr__(self, "domain_hint", tuple((-1.0, 1.0) for _ in range(self.n)))
        elif len(self.domain_hint) != self.n:
            raise ConfigurationError("domain_hint needs one interval per coordinate")
        object.__setattr__(self, "h", tuple(self.h))
        object.__setattr__(self, "phi", tuple(self.phi))
        self._check_origin()

    def _check_origin(self) -> None:
        origin = [0.0] * self.n
        for i, h in enumerate(self.h):
            value = float(base_value(h(origin)))
            if abs(value - 1.0) > ORIGIN_TOL:
                raise ConfigurationError(f"h{i + 1}(0) = {value}, must equal 1")
        for j, phi in enumerate(self.phi):
            value, grad = dual_gradient(phi, origin)
            if abs(float(value)) > ORIGIN_TOL or max(abs(float(g)) for g in grad) > ORIGIN_TOL:
                raise ConfigurationError(f"phi_{j + 3} must vanish with its gradient at the origin")

    def casimir(self, j: int, x: Sequence[Any]) -> Any:
        """D_j(x) = x_j + phi_j(x) for j = 2..n-1 (0-based coordinate index)."""
        return x[j] + self.phi[j - 2](x)

    def hamiltonian_value(self, x: Sequence[Any]) -> Any:
        a = x[0] * self.h[0](x)
        b = x[1] * self.h[1](x)
        return 0.5 * (a * a + b * b)

    def structure(self, x: Sequence[Any]) -> List[List[Any]]:
        """I(x) J0(x) as nested lists; jet-capable."""
        scale = self.I(x)
        return [[scale * entry for entry in row] for row in self.J0(x)]


@dataclass(frozen=True)
class PerturbedSpec:
    """
    Perturbed system dx/dt = J(x) grad H(x) + eps F(x; eps).

    F has arity n + 1; the last coordinate is eps.
    """
    base: PoissonSpec
    F: VectorField
    epsilon: float = 0.0
    check_origin: bool = True

    def __post_init__(self):
        n = self.base.n
        if self.F.arity != n + 1 or self.F.dim != n:
            raise ConfigurationError(
                f"Perturbation must map R^{n} x R to R^{n}, got arity {self.F.arity}, dim {self.F.dim}"
            )
        if self.check_origin:
            for eps in sorted({0.0, float(self.epsilon), 1e-3, -1e-3}):
                self._check_origin_at(eps)

    def _check_origin_at(self, eps: float) -> None:
        n = self.base.n
        values, rows = dual_jacobian(lambda x: self.F(list(x) + [eps]), [0.0] * n)
        if max(abs(float(base_value(v))) for v in values) > ORIGIN_TOL:
            raise ConfigurationError(f"F(0; {eps}) must vanish")
        if max(abs(float(base_value(e))) for row in rows for e in row) > ORIGIN_TOL:
            raise ConfigurationError(f"grad_x F(0; {eps}) must vanish")

    def evaluate_F(self, x: Sequence[Any], eps: Any) -> List[Any]:
        return self.F(list(x) + [eps])

    def vector_field(self, x: Sequence[Any], eps: Optional[float] = None) -> np.ndarray:
        """J(x) grad H(x) + eps F(x; eps) at a float point."""
        eps = self.epsilon if eps is None else eps
        x = [float(v) for v in x]
        J = structure_matrix(self.base, x)
        _, grad = dual_gradient(self.base.hamiltonian_value, x)
        flow = J @ np.array([float(g) for g in grad])
        if eps != 0.0:
            flow = flow + eps * np.array([float(base_value(f)) for f in self.evaluate_F(x, eps)])
        return flow


def hamiltonian(spec: PoissonSpec) -> ScalarField:
    """H(x) = (x1^2 h1^2(x) + x2^2 h2^2(x)) / 2 as a field."""
    return ScalarField(spec.hamiltonian_value, spec.n, f"H[{spec.name}]")


def structure_matrix(spec: PoissonSpec, x: Sequence[float]) -> np.ndarray:
    """I(x) J0(x) as a float matrix; DomainError where I vanishes."""
    x = [float(v) for v in x]
    scale = float(base_value(spec.I(x)))
    if scale == 0.0 or not np.isfinite(scale):
        raise DomainError("First integral I vanishes", location=x)
    rows = spec.J0(x)
    return scale * np.array([[float(base_value(e)) for e in row] for row in rows])


def numerical_rank(matrix: np.ndarray, rel_tol: float = RANK_PIVOT_TOL) -> int:
    """Rank by Gaussian elimination with partial pivoting, pivot tol rel_tol * ||M||."""
    a = np.array(matrix, dtype=float)
    rows, cols = a.shape
    threshold = rel_tol * max(np.abs(a).max(initial=0.0), np.finfo(float).tiny)
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivot = rank + int(np.argmax(np.abs(a[rank:, col])))
        if abs(a[pivot, col]) <= threshold:
            continue
        a[[rank, pivot]] = a[[pivot, rank]]
        a[rank + 1:] -= np.outer(a[rank + 1:, col] / a[rank, col], a[rank])
        rank += 1
    return rank


@dataclass(frozen=True)
class CheckFailure:
    check: str
    point: Tuple[float, ...]
    detail: str

    def to_dict(self) -> Dict[str, Any]:
        return {"check": self.check, "point": list(self.point), "detail": self.detail}


@dataclass(frozen=True)
class PoissonValidationReport:
    """
    Outcome of sampled validation; `merge` is associative so per-sample
    reports can be combined in any grouping.
    """
    sample_count: int = 0
    failures: Tuple[CheckFailure, ...] = ()
    max_residuals: Tuple[Tuple[str, float], ...] = ()
    ranks: Tuple[int, ...] = ()

    @property
    def valid(self) -> bool:
        return self.sample_count > 0 and not self.failures

    def residual(self, check: str) -> float:
        return dict(self.max_residuals).get(check, 0.0)

    def merge(self, other: "PoissonValidationReport") -> "PoissonValidationReport":
        residuals = dict(self.max_residuals)
        for check, value in other.max_residuals:
            residuals[check] = max(residuals.get(check, 0.0), value)
        return PoissonValidationReport(
            sample_count=self.sample_count + other.sample_count,
            failures=self.failures + other.failures,
            max_residuals=tuple(sorted(residuals.items())),
            ranks=tuple(sorted(set(self.ranks) | set(other.ranks))),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "valid": self.valid,
            "sample_count": self.sample_count,
            "max_residuals": dict(self.max_residuals),
            "ranks": list(self.ranks),
            "failures": [f.to_dict() for f in self.failures[:20]],
            "failure_count": len(self.failures),
        }


def sample_points(spec: PoissonSpec, count: int, seed: int = DEFAULT_SAMPLE_SEED) -> np.ndarray:
    """Uniform samples of the domain hint with a fixed RNG seed."""
    rng = np.random.default_rng(seed)
    lows = np.array([lo for lo, _ in spec.domain_hint])
    highs = np.array([hi for _, hi in spec.domain_hint])
    return lows + (highs - lows) * rng.random((count, spec.n))


def check_sample(spec: PoissonSpec, x: Sequence[float]) -> PoissonValidationReport:
    """Run every structural check at one point."""
    n = spec.n
    x = [float(v) for v in x]
    point = tuple(x)
    failures: List[CheckFailure] = []
    residuals: Dict[str, float] = {}

    seeded = Jet1.variables(x)
    tag = seeded[0].tag
    entries = spec.structure(seeded)
    J = np.array([[float(value_at(e, tag)) for e in row] for row in entries])
    dJ = np.array([[[float(p) for p in partials_at(e, tag, n)] for e in row] for row in entries])
    # dJ[i, k, l] = d J_ik / d x_l

    scale_I = float(base_value(spec.I(x)))
    if scale_I == 0.0 or not np.isfinite(scale_I):
        failures.append(CheckFailure("first_integral", point, f"I(x) = {scale_I}"))

    norm = max(np.abs(J).max(), 1.0)
    antisymmetry = float(np.abs(J + J.T).max())
    residuals["antisymmetry"] = antisymmetry
    if antisymmetry > ANTISYMMETRY_TOL * norm:
        failures.append(CheckFailure("antisymmetry", point, f"max |J + J^T| = {antisymmetry:.3e}"))

    rank = numerical_rank(J)
    if rank != 2:
        failures.append(CheckFailure("rank", point, f"numerical rank {rank}, expected 2"))

    jacobi = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                cyclic = (
                    J[i, :] @ dJ[j, k, :]
                    + J[j, :] @ dJ[k, i, :]
                    + J[k, :] @ dJ[i, j, :]
                )
                jacobi = max(jacobi, abs(float(cyclic)))
    residuals["jacobi"] = jacobi
    if jacobi > JACOBI_TOL:
        failures.append(CheckFailure("jacobi", point, f"cyclic sum {jacobi:.3e}"))

    casimir = 0.0
    for j in range(2, n):
        _, grad = dual_gradient(lambda p, j=j: spec.casimir(j, p), x)
        grad = np.array([float(g) for g in grad])
        casimir = max(casimir, float(np.abs(J @ grad).max()))
    residuals["casimir"] = casimir
    if casimir > CASIMIR_TOL:
        failures.append(CheckFailure("casimir", point, f"max |J grad D| = {casimir:.3e}"))

    _, grad_h = dual_gradient(spec.hamiltonian_value, x)
    grad_h = np.array([float(g) for g in grad_h])
    energy = abs(float(grad_h @ (J @ grad_h)))
    residuals["energy"] = energy
    if energy > ENERGY_TOL * max(1.0, float(grad_h @ grad_h)):
        failures.append(CheckFailure("energy", point, f"grad H . J grad H = {energy:.3e}"))

    return PoissonValidationReport(
        sample_count=1,
        failures=tuple(failures),
        max_residuals=tuple(sorted(residuals.items())),
        ranks=(rank,),
    )


def validate_poisson(spec: PoissonSpec, sample_count: int = 50, seed: int = DEFAULT_SAMPLE_SEED) -> PoissonValidationReport:
    """
    Validate a spec at `sample_count` uniform points of its domain hint.

    Args:
        spec: the Poisson system
        sample_count: number of samples (>= 1)
        seed: RNG seed for the samples

    Returns:
        PoissonValidationReport; `valid` is False if any check failed
    """
    if sample_count < 1:
        raise ConfigurationError("sample_count must be at least 1")
    reports = []
    for x in sample_points(spec, sample_count, seed):
        try:
            reports.append(check_sample(spec, x))
        except (ArithmeticError, ValueError) as e:
            reports.append(PoissonValidationReport(
                sample_count=1,
                failures=(CheckFailure("evaluation", tuple(float(v) for v in x), str(e)),),
            ))
    report = reduce(PoissonValidationReport.merge, reports, PoissonValidationReport())
    if report.valid:
        logger.info(f"Validated Poisson spec '{spec.name}' at {report.sample_count} samples")
    else:
        first = report.failures[0]
        logger.warning(
            f"Poisson spec '{spec.name}' failed {len(report.failures)} check(s); "
            f"first: {first.check} at {first.point}"
        )
    return report
