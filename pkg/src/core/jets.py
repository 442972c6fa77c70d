"""
Forward-mode jets for PoissonOrbits
Multi-seed first-order dual numbers with nesting

A Jet1 carries a value and one partial derivative per active seed
direction. Values and partials may be floats, numpy arrays (one entry per
quadrature node, evaluated in lock-step) or Jet1 objects belonging to an
outer seed group. Nesting is how the pipeline gets derivatives of
quantities that are themselves derivatives, e.g. the (r, z)-Jacobian of
DPhi(x(r, z)).

Every seed group has an integer tag. When two jets with different tags
meet, the one with the larger (inner) tag treats the other as a constant.
Seed counts must agree between operands of the same group.
"""

import itertools
from typing import Any, Callable, List, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError

_seed_groups = itertools.count(1)


def new_tag() -> int:
    """Allocate a fresh seed-group tag (larger than every earlier one)."""
    return next(_seed_groups)


class Jet1:
    """First-order jet: value plus partials along `len(partials)` seeds."""

    __slots__ = ("value", "partials", "tag")

    # numpy must not broadcast a Jet1 into an object array; it defers to
    # the reflected operators below instead.
    __array_ufunc__ = None

    def __init__(self, value: Any, partials: Sequence[Any] = (), tag: int = 0):
        self.value = value
        self.partials = tuple(partials)
        self.tag = tag

    @classmethod
    def variables(cls, values: Sequence[Any], tag: int = None) -> List["Jet1"]:
        """Seed each coordinate along its own unit direction in a new group."""
        tag = new_tag() if tag is None else tag
        m = len(values)
        return [
            cls(v, [1.0 if j == i else 0.0 for j in range(m)], tag)
            for i, v in enumerate(values)
        ]

    @classmethod
    def constant(cls, value: Any, seeds: int, tag: int) -> "Jet1":
        return cls(value, [0.0] * seeds, tag)

    @property
    def seeds(self) -> int:
        return len(self.partials)

    def __repr__(self) -> str:
        return f"Jet1(value={self.value!r}, partials={self.partials!r}, tag={self.tag})"

    # Arithmetic

    def __add__(self, other):
        tag, av, ap, bv, bp = _lift(self, other)
        if ap is None:
            return Jet1(av + bv, bp, tag)
        if bp is None:
            return Jet1(av + bv, ap, tag)
        return Jet1(av + bv, [p + q for p, q in zip(ap, bp)], tag)

    def __radd__(self, other):
        tag, av, ap, bv, bp = _lift(other, self)
        if ap is None:
            return Jet1(av + bv, bp, tag)
        return Jet1(av + bv, [p + q for p, q in zip(ap, bp)], tag)

    def __sub__(self, other):
        return _subtract(*_lift(self, other))

    def __rsub__(self, other):
        return _subtract(*_lift(other, self))

    def __mul__(self, other):
        return _multiply(*_lift(self, other))

    def __rmul__(self, other):
        return _multiply(*_lift(other, self))

    def __truediv__(self, other):
        return _divide(*_lift(self, other))

    def __rtruediv__(self, other):
        return _divide(*_lift(other, self))

    def __neg__(self):
        return Jet1(-self.value, [-p for p in self.partials], self.tag)

    def __pos__(self):
        return self

    def __pow__(self, power):
        if isinstance(power, Jet1):
            return exp(log(self) * power)
        if isinstance(power, (int, np.integer)) and power >= 0:
            return _integer_power(self, int(power))
        scale = power * self.value ** (power - 1)
        return Jet1(self.value ** power, [scale * p for p in self.partials], self.tag)

    def __rpow__(self, base):
        return exp(self * log(base))


def _lift(a: Any, b: Any) -> Tuple[int, Any, Any, Any, Any]:
    """Split two operands at the innermost seed group present."""
    ta = a.tag if isinstance(a, Jet1) else -1
    tb = b.tag if isinstance(b, Jet1) else -1
    tag = ta if ta >= tb else tb
    if ta == tag:
        av, ap = a.value, a.partials
    else:
        av, ap = a, None
    if tb == tag:
        bv, bp = b.value, b.partials
    else:
        bv, bp = b, None
    if ap is not None and bp is not None and len(ap) != len(bp):
        raise ConfigurationError(
            f"Seed count mismatch in one evaluation: {len(ap)} vs {len(bp)} (group {tag})"
        )
    return tag, av, ap, bv, bp


def _subtract(tag, av, ap, bv, bp):
    if bp is None:
        return Jet1(av - bv, ap, tag)
    if ap is None:
        return Jet1(av - bv, [-q for q in bp], tag)
    return Jet1(av - bv, [p - q for p, q in zip(ap, bp)], tag)


def _multiply(tag, av, ap, bv, bp):
    if bp is None:
        return Jet1(av * bv, [p * bv for p in ap], tag)
    if ap is None:
        return Jet1(av * bv, [av * q for q in bp], tag)
    return Jet1(av * bv, [p * bv + av * q for p, q in zip(ap, bp)], tag)


def _divide(tag, av, ap, bv, bp):
    if bp is None:
        return Jet1(av / bv, [p / bv for p in ap], tag)
    inverse = 1.0 / bv
    quotient = av * inverse
    if ap is None:
        return Jet1(quotient, [-(quotient * q) * inverse for q in bp], tag)
    return Jet1(quotient, [(p - quotient * q) * inverse for p, q in zip(ap, bp)], tag)


def _integer_power(x: Jet1, k: int):
    if k == 0:
        return 1.0
    result = None
    base = x
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    return result


# Elementary functions (dispatch recursively through nested groups)

def sin(x):
    if isinstance(x, Jet1):
        d = cos(x.value)
        return Jet1(sin(x.value), [d * p for p in x.partials], x.tag)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet1):
        d = -sin(x.value)
        return Jet1(cos(x.value), [d * p for p in x.partials], x.tag)
    return np.cos(x)


def exp(x):
    if isinstance(x, Jet1):
        e = exp(x.value)
        return Jet1(e, [e * p for p in x.partials], x.tag)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet1):
        return Jet1(log(x.value), [p / x.value for p in x.partials], x.tag)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Jet1):
        s = sqrt(x.value)
        half_inverse = 0.5 / s
        return Jet1(s, [p * half_inverse for p in x.partials], x.tag)
    return np.sqrt(x)


# Inspection helpers

def base_value(x: Any) -> Any:
    """Strip every seed group and return the plain float/array value."""
    while isinstance(x, Jet1):
        x = x.value
    return x


def value_at(x: Any, tag: int) -> Any:
    """Value of `x` with the seed group `tag` removed (outer groups kept)."""
    if isinstance(x, Jet1) and x.tag == tag:
        return x.value
    return x


def partials_at(x: Any, tag: int, seeds: int) -> List[Any]:
    """Partials of `x` in group `tag`; zeros when `x` is constant there."""
    if isinstance(x, Jet1) and x.tag == tag:
        return list(x.partials)
    return [0.0] * seeds


def top_tag(values: Sequence[Any]) -> int:
    """Innermost tag among `values`, or -1 when none of them is a jet."""
    tags = [v.tag for v in values if isinstance(v, Jet1)]
    return max(tags) if tags else -1


def check_uniform_seeds(point: Sequence[Any]) -> None:
    """Raise when jets of one group carry different seed counts."""
    counts = {}
    for coordinate in point:
        while isinstance(coordinate, Jet1):
            known = counts.setdefault(coordinate.tag, coordinate.seeds)
            if known != coordinate.seeds:
                raise ConfigurationError(
                    f"Non-uniform seed count in group {coordinate.tag}: {known} vs {coordinate.seeds}"
                )
            coordinate = coordinate.value


def dual_gradient(fn: Callable[[List[Any]], Any], point: Sequence[Any]) -> Tuple[Any, List[Any]]:
    """
    Value and gradient of a scalar function via one seeded evaluation.

    Args:
        fn: callable taking a list of coordinates
        point: coordinates (floats, arrays, or outer-group jets)

    Returns:
        (value, gradient) where gradient entries live in the outer groups
    """
    seeded = Jet1.variables(list(point))
    tag = seeded[0].tag if seeded else new_tag()
    out = fn(seeded)
    return value_at(out, tag), partials_at(out, tag, len(seeded))


def dual_jacobian(fn: Callable[[List[Any]], Sequence[Any]], point: Sequence[Any]) -> Tuple[List[Any], List[List[Any]]]:
    """Values and Jacobian rows of a vector function via one seeded evaluation."""
    seeded = Jet1.variables(list(point))
    tag = seeded[0].tag if seeded else new_tag()
    m = len(seeded)
    out = list(fn(seeded))
    return [value_at(o, tag) for o in out], [partials_at(o, tag, m) for o in out]
