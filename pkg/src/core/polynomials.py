"""
Sparse polynomials for PoissonOrbits
Coefficient-defined perturbations, Hamiltonian factors and Casimir offsets

Terms are stored as {exponent tuple: coefficient} with zero coefficients
dropped. Evaluation works on floats, numpy arrays and Jet1 coordinates, so
a polynomial can be turned into a field and differentiated through the
rest of the pipeline.
"""

import logging
import math
import re
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import ConfigurationError
from .fields import ScalarField, VectorField

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]

_COEFFICIENT_NAME = re.compile(r"^([a-z])(\d+)$")


class SparsePoly:
    """
    Sparse multivariate polynomial with real coefficients.

    Attributes:
        arity: number of variables d
        terms: mapping exponent tuple (n1, ..., nd) -> nonzero coefficient
    """

    def __init__(self, terms: Optional[Mapping[Sequence[int], float]] = None, arity: int = 1):
        if arity < 1:
            raise ConfigurationError("Polynomial arity must be at least 1")
        self.arity = arity
        self.terms: Dict[Exponent, float] = {}
        for exponent, coefficient in (terms or {}).items():
            exponent = tuple(int(e) for e in exponent)
            if len(exponent) != arity:
                raise ConfigurationError(
                    f"Exponent {exponent} has {len(exponent)} entries, polynomial arity is {arity}"
                )
            if any(e < 0 for e in exponent):
                raise ConfigurationError(f"Negative exponent in {exponent}")
            coefficient = float(coefficient)
            if not math.isfinite(coefficient):
                raise ConfigurationError(f"Non-finite coefficient for monomial {exponent}")
            total = self.terms.get(exponent, 0.0) + coefficient
            if total == 0.0:
                self.terms.pop(exponent, None)
            else:
                self.terms[exponent] = total

    # Construction helpers

    @classmethod
    def zero(cls, arity: int) -> "SparsePoly":
        return cls({}, arity)

    @classmethod
    def monomial(cls, exponent: Sequence[int], coefficient: float = 1.0) -> "SparsePoly":
        return cls({tuple(exponent): coefficient}, len(exponent))

    @classmethod
    def from_json(cls, data: Mapping[str, Any], arity: int) -> "SparsePoly":
        """Parse {"n1 n2 n3": coefficient} (space-separated exponents)."""
        if not isinstance(data, Mapping):
            raise ConfigurationError(f"Polynomial must be a JSON object, got {type(data).__name__}")
        terms = {}
        for key, coefficient in data.items():
            terms[parse_exponent_key(key, arity)] = _as_coefficient(coefficient, key)
        return cls(terms, arity)

    def to_json(self) -> Dict[str, float]:
        return {" ".join(str(e) for e in exponent): coefficient for exponent, coefficient in self.sorted_terms()}

    # Introspection

    def sorted_terms(self) -> List[Tuple[Exponent, float]]:
        return sorted(self.terms.items())

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def min_degree(self) -> Optional[int]:
        return min((sum(e) for e in self.terms), default=None)

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    def coefficient(self, exponent: Sequence[int]) -> float:
        return self.terms.get(tuple(exponent), 0.0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.arity == other.arity and self.terms == other.terms

    def __repr__(self) -> str:
        return f"SparsePoly({self.to_json()!r}, arity={self.arity})"

    # Algebra

    def __add__(self, other: "SparsePoly") -> "SparsePoly":
        _check_same_arity(self, other)
        merged = dict(self.terms)
        for exponent, coefficient in other.terms.items():
            merged[exponent] = merged.get(exponent, 0.0) + coefficient
        return SparsePoly(merged, self.arity)

    def __neg__(self) -> "SparsePoly":
        return self.scale(-1.0)

    def __sub__(self, other: "SparsePoly") -> "SparsePoly":
        return self + (-other)

    def scale(self, factor: float) -> "SparsePoly":
        return SparsePoly({e: factor * c for e, c in self.terms.items()}, self.arity)

    def derivative(self, index: int) -> "SparsePoly":
        """Partial derivative with respect to variable `index` (0-based)."""
        terms = {}
        for exponent, coefficient in self.terms.items():
            power = exponent[index]
            if power == 0:
                continue
            lowered = list(exponent)
            lowered[index] -= 1
            terms[tuple(lowered)] = coefficient * power
        return SparsePoly(terms, self.arity)

    # Evaluation

    def __call__(self, point: Sequence[Any]) -> Any:
        return poly_eval(self, point)

    def to_field(self, name: str = "poly") -> ScalarField:
        return ScalarField(self.__call__, self.arity, name)


def _check_same_arity(a: SparsePoly, b: SparsePoly) -> None:
    if a.arity != b.arity:
        raise ConfigurationError(f"Polynomial arity mismatch: {a.arity} vs {b.arity}")


def _as_coefficient(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"Coefficient for '{key}' must be a number")
    return float(value)


def parse_exponent_key(key: str, arity: int) -> Exponent:
    """Parse a space-separated exponent string such as "1 0 2"."""
    parts = str(key).split()
    if len(parts) != arity:
        raise ConfigurationError(
            f"Exponent key '{key}' has {len(parts)} entries, expected {arity}"
        )
    try:
        exponent = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"Exponent key '{key}' must contain integers") from None
    if any(e < 0 for e in exponent):
        raise ConfigurationError(f"Exponent key '{key}' has a negative entry")
    return exponent


def poly_eval(p: SparsePoly, point: Sequence[Any]) -> Any:
    """
    Evaluate sum(coeff * prod(x_i ** n_i)) on floats, arrays or jets.

    Powers of each coordinate are built once by repeated multiplication so
    derivatives propagate exactly and x ** 0 never touches x.
    """
    if len(point) != p.arity:
        raise ConfigurationError(f"Polynomial arity is {p.arity}, point has {len(point)} coordinates")
    if not p.terms:
        return 0.0
    highest = [0] * p.arity
    for exponent in p.terms:
        for i, e in enumerate(exponent):
            if e > highest[i]:
                highest[i] = e
    powers: List[List[Any]] = []
    for i, top in enumerate(highest):
        table = [None, point[i]]
        for _ in range(2, top + 1):
            table.append(table[-1] * point[i])
        powers.append(table)

    total: Any = 0.0
    for exponent, coefficient in p.sorted_terms():
        term: Any = coefficient
        for i, e in enumerate(exponent):
            if e:
                term = term * powers[i][e]
        total = total + term
    return total


def poly_partial_at_zero(p: SparsePoly, multi_index: Sequence[int]) -> float:
    """Exact mixed partial at the origin: coefficient times prod(n_i!)."""
    multi_index = tuple(int(n) for n in multi_index)
    if len(multi_index) != p.arity:
        raise ConfigurationError(f"Multi-index {multi_index} does not match arity {p.arity}")
    coefficient = p.terms.get(multi_index, 0.0)
    if coefficient == 0.0:
        return 0.0
    factor = 1
    for n in multi_index:
        factor *= math.factorial(n)
    return coefficient * factor


def polys_from_coefficients(coefficients: Mapping[str, float], arity: int = 3, dim: Optional[int] = None) -> List[SparsePoly]:
    """
    Build component polynomials from names like a101, b011, c020.

    The letter selects the component (a -> first, b -> second, ...) and the
    digits give one exponent per variable.
    """
    dim = arity if dim is None else dim
    terms: List[Dict[Exponent, float]] = [{} for _ in range(dim)]
    for name, value in coefficients.items():
        match = _COEFFICIENT_NAME.match(str(name))
        if not match:
            raise ConfigurationError(f"Coefficient name '{name}' is not of the form a101")
        component = ord(match.group(1)) - ord("a")
        digits = match.group(2)
        if component >= dim:
            raise ConfigurationError(f"Coefficient '{name}' selects component {component + 1} of {dim}")
        if len(digits) != arity:
            raise ConfigurationError(f"Coefficient '{name}' needs {arity} exponent digits")
        exponent = tuple(int(d) for d in digits)
        terms[component][exponent] = terms[component].get(exponent, 0.0) + _as_coefficient(value, name)
    return [SparsePoly(t, arity) for t in terms]


def coefficient_name(component: int, exponent: Sequence[int]) -> str:
    return chr(ord("a") + component) + "".join(str(e) for e in exponent)


def perturbation_field(polys: Sequence[SparsePoly], eps_polys: Optional[Sequence[SparsePoly]] = None, name: str = "F") -> VectorField:
    """
    F(x; eps) = P(x) + eps * Q(x) as a VectorField of arity n + 1.

    The last coordinate of the evaluation point is eps.
    """
    polys = list(polys)
    n = polys[0].arity if polys else 0
    for p in polys:
        if p.arity != n:
            raise ConfigurationError("Perturbation components must share one arity")
    eps_polys = list(eps_polys) if eps_polys else []
    if eps_polys and len(eps_polys) != len(polys):
        raise ConfigurationError("F_eps must have as many components as F")

    def evaluate(point: Sequence[Any]) -> List[Any]:
        x, eps = list(point[:n]), point[n]
        out = []
        for i, p in enumerate(polys):
            value = poly_eval(p, x) if p.terms else 0.0
            if eps_polys and eps_polys[i].terms:
                value = value + eps * poly_eval(eps_polys[i], x)
            out.append(value)
        return out

    return VectorField(evaluate, n + 1, len(polys), name)


def all_monomials(arity: int, max_degree: int, min_degree: int = 0) -> Iterable[Exponent]:
    """Exponent tuples of total degree in [min_degree, max_degree], sorted."""
    def build(prefix: Tuple[int, ...], remaining: int, slots: int):
        if slots == 0:
            yield prefix
            return
        for e in range(remaining + 1):
            yield from build(prefix + (e,), remaining - e, slots - 1)

    found = [e for e in build((), max_degree, arity) if sum(e) >= min_degree]
    return sorted(found, key=lambda e: (sum(e), e))
