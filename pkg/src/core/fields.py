"""
Fields for PoissonOrbits
Scalar, vector and matrix fields evaluated on jet coordinates

A field wraps a pure Python callable that accepts a list of coordinates
(floats, numpy arrays or Jet1 objects) and returns its output built from
ordinary arithmetic and the elementary functions in `jets`. Derivatives
come for free by seeding the coordinates.
"""

from typing import Any, Callable, List, Optional, Sequence

from .errors import ConfigurationError
from .jets import check_uniform_seeds


class ScalarField:
    """Pure scalar function of `arity` coordinates."""

    def __init__(self, fn: Callable[[Sequence[Any]], Any], arity: int, name: str = "scalar"):
        if arity < 1:
            raise ConfigurationError(f"Field '{name}' must take at least one coordinate")
        self.fn = fn
        self.arity = arity
        self.name = name

    def __call__(self, point: Sequence[Any]) -> Any:
        return self.fn(point)

    def __repr__(self) -> str:
        return f"ScalarField({self.name!r}, arity={self.arity})"

    @classmethod
    def constant(cls, value: float, arity: int, name: str = "constant") -> "ScalarField":
        return cls(lambda x: value, arity, name)

    @classmethod
    def coordinate(cls, index: int, arity: int) -> "ScalarField":
        return cls(lambda x: x[index], arity, f"x{index + 1}")


class VectorField:
    """Pure vector function of `arity` coordinates with `dim` outputs."""

    def __init__(self, fn: Callable[[Sequence[Any]], Sequence[Any]], arity: int, dim: int, name: str = "vector"):
        self.fn = fn
        self.arity = arity
        self.dim = dim
        self.name = name

    def __call__(self, point: Sequence[Any]) -> List[Any]:
        out = list(self.fn(point))
        if len(out) != self.dim:
            raise ConfigurationError(
                f"Field '{self.name}' returned {len(out)} components, expected {self.dim}"
            )
        return out

    def __repr__(self) -> str:
        return f"VectorField({self.name!r}, arity={self.arity}, dim={self.dim})"

    @classmethod
    def from_components(cls, components: Sequence[ScalarField], arity: Optional[int] = None, name: str = "vector") -> "VectorField":
        components = list(components)
        arity = arity if arity is not None else max(c.arity for c in components)
        return cls(lambda x: [c(x) for c in components], arity, len(components), name)

    @classmethod
    def zero(cls, arity: int, dim: int) -> "VectorField":
        return cls(lambda x: [0.0] * dim, arity, dim, "zero")


class MatrixField:
    """Pure square-matrix function; returns nested lists (rows)."""

    def __init__(self, fn: Callable[[Sequence[Any]], Sequence[Sequence[Any]]], size: int, name: str = "matrix"):
        self.fn = fn
        self.size = size
        self.arity = size
        self.name = name

    def __call__(self, point: Sequence[Any]) -> List[List[Any]]:
        rows = [list(row) for row in self.fn(point)]
        if len(rows) != self.size or any(len(row) != self.size for row in rows):
            raise ConfigurationError(f"Field '{self.name}' is not {self.size}x{self.size}")
        return rows

    @classmethod
    def constant(cls, matrix: Sequence[Sequence[float]], name: str = "constant") -> "MatrixField":
        frozen = [[float(v) for v in row] for row in matrix]
        return cls(lambda x: frozen, len(frozen), name)


def darboux_matrix(n: int) -> List[List[float]]:
    """J_D: one symplectic 2x2 block followed by zeros."""
    matrix = [[0.0] * n for _ in range(n)]
    matrix[0][1] = 1.0
    matrix[1][0] = -1.0
    return matrix


def jet_eval(field: Any, point: Sequence[Any]) -> Any:
    """
    Evaluate a field at jet coordinates after checking arity and seeds.

    Args:
        field: ScalarField, VectorField or MatrixField
        point: coordinates, each a float, array or Jet1

    Returns:
        Field output with partials along the seeds of `point`
    """
    if len(point) != field.arity:
        raise ConfigurationError(
            f"Field '{field.name}' expects {field.arity} coordinates, got {len(point)}"
        )
    check_uniform_seeds(point)
    return field(list(point))
