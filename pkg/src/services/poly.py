"""
Sparse multivariate polynomials with float coefficients, boxes and square
polynomial systems.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from src.conf import messages
from src.services.exceptions import DimensionMismatch, IndexOutOfRange

Exponent = tuple[int, ...]


def grlex_key(exp: Exponent) -> tuple[int, Exponent]:
    return sum(exp), exp


def monomials(n: int, k: int) -> list[Exponent]:
    """
    Enumerates the exponent vectors of total degree ``k`` in ``n`` variables.

    The order is graded lexicographic, largest first, e.g. ``(2, 0), (1, 1), (0, 2)``.

    :param n: The number of variables.
    :type n: int
    :param k: The total degree.
    :type k: int
    :return: All exponent vectors with entries summing to ``k``.
    :rtype: list[tuple[int, ...]]
    """
    if n == 1:
        return [(k,)]
    result = []
    for first in range(k, -1, -1):
        for rest in monomials(n - 1, k - first):
            result.append((first,) + rest)
    return result


class MultiPoly:
    """
    Immutable sparse polynomial in ``n`` variables.

    Terms are kept in canonical form: no zero coefficients, no repeated
    exponents, graded lexicographic order (leading term first).
    """
    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Exponent, float] | Iterable[tuple[Exponent, float]] = ()):
        if isinstance(terms, Mapping):
            terms = terms.items()
        acc: dict[Exponent, float] = {}
        for exp, coeff in terms:
            exp = tuple(int(e) for e in exp)
            if len(exp) != n:
                raise DimensionMismatch(f"{messages.DIMENSION_MISMATCH}: exponent {exp} for n={n}")
            if any(e < 0 for e in exp):
                raise ValueError(f"Negative exponent in {exp}")
            acc[exp] = acc.get(exp, 0.0) + float(coeff)
        self.n = n
        self._terms = tuple(
            sorted(((e, c) for e, c in acc.items() if c != 0.0), key=lambda t: grlex_key(t[0]), reverse=True)
        )

    @classmethod
    def zero(cls, n: int) -> "MultiPoly":
        return cls(n)

    @classmethod
    def constant(cls, n: int, c: float) -> "MultiPoly":
        return cls(n, {(0,) * n: c})

    @classmethod
    def monomial(cls, n: int, exp: Sequence[int], coeff: float = 1.0) -> "MultiPoly":
        return cls(n, {tuple(exp): coeff})

    @classmethod
    def variable(cls, n: int, i: int) -> "MultiPoly":
        """
        Returns the coordinate polynomial ``x_i`` (1-based index).
        """
        if not 1 <= i <= n:
            raise IndexOutOfRange()
        return cls.monomial(n, tuple(1 if j == i - 1 else 0 for j in range(n)))

    def items(self) -> tuple[tuple[Exponent, float], ...]:
        return self._terms

    def coeff(self, exp: Sequence[int]) -> float:
        exp = tuple(exp)
        for e, c in self._terms:
            if e == exp:
                return c
        return 0.0

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.n, self._terms))

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*x^{e}" for e, c in self._terms) or "0"
        return f"MultiPoly(n={self.n}, {body})"

    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            if other.n != self.n:
                raise DimensionMismatch()
            return other
        return MultiPoly.constant(self.n, float(other))

    def __add__(self, other) -> "MultiPoly":
        other = self._coerce(other)
        return MultiPoly(self.n, self._terms + other._terms)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.n, [(e, -c) for e, c in self._terms])

    def __sub__(self, other) -> "MultiPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "MultiPoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            c = float(other)
            return MultiPoly(self.n, [(e, c * v) for e, v in self._terms])
        other = self._coerce(other)
        products = (
            (tuple(a + b for a, b in zip(ea, eb)), ca * cb)
            for ea, ca in self._terms
            for eb, cb in other._terms
        )
        return MultiPoly(self.n, products)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "MultiPoly":
        return self * (1.0 / c)

    def __pow__(self, power: int) -> "MultiPoly":
        if power < 0:
            raise ValueError("Negative powers are not polynomials")
        result = MultiPoly.constant(self.n, 1.0)
        for _ in range(power):
            result = result * self
        return result

    def shift(self, exp: Sequence[int]) -> "MultiPoly":
        """
        Multiplies by the monomial ``x^exp``.
        """
        return MultiPoly(self.n, [(tuple(a + b for a, b in zip(e, exp)), c) for e, c in self._terms])

    def evaluate(self, x: Sequence[float]) -> float:
        """
        Evaluates the polynomial at a point with compensated summation.

        :param x: The point, one coordinate per variable.
        :type x: Sequence[float]
        :raises DimensionMismatch: If ``len(x)`` differs from ``n``.
        :return: The value of the polynomial at ``x``.
        :rtype: float
        """
        if len(x) != self.n:
            raise DimensionMismatch()
        return math.fsum(c * math.prod(xi ** e for xi, e in zip(x, exp)) for exp, c in self._terms)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.n:
            raise DimensionMismatch()
        return CompiledPoly(self).values(power_tables(points, max(self.max_exponent(), 0)))

    def partial(self, i: int) -> "MultiPoly":
        """
        Formal partial derivative with respect to ``x_i`` (1-based).

        :param i: The variable index.
        :type i: int
        :raises IndexOutOfRange: If ``i`` is not in ``[1, n]``.
        :return: The derivative in canonical sparse form.
        :rtype: MultiPoly
        """
        if not 1 <= i <= self.n:
            raise IndexOutOfRange()
        j = i - 1
        terms = []
        for e, c in self._terms:
            if e[j] > 0:
                terms.append((e[:j] + (e[j] - 1,) + e[j + 1:], c * e[j]))
        return MultiPoly(self.n, terms)

    def gradient(self) -> list["MultiPoly"]:
        return [self.partial(i) for i in range(1, self.n + 1)]

    def weighted_norm(self) -> float:
        return math.fsum(sum(e) * abs(c) for e, c in self._terms)

    def coeff_bound_on_box(self, box: "Box") -> float:
        """
        Upper bound of ``max |p|`` on a box from absolute coefficients.

        Every monomial is bounded by the product of the largest absolute
        coordinate values, so the result never underestimates the maximum.
        """
        if box.n != self.n:
            raise DimensionMismatch()
        radii = box.radii
        return math.fsum(abs(c) * math.prod(r ** e for r, e in zip(radii, exp)) for exp, c in self._terms)

    def support(self) -> set[Exponent]:
        return {e for e, _ in self._terms}

    def total_degree(self) -> int | None:
        if not self._terms:
            return None
        return max(sum(e) for e, _ in self._terms)

    def max_exponent(self) -> int:
        return max((max(e) for e, _ in self._terms), default=0)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for _, c in self._terms), default=0.0)

    def homogeneous_part(self, d: int) -> "MultiPoly":
        return MultiPoly(self.n, [(e, c) for e, c in self._terms if sum(e) == d])

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e, _ in self._terms}) <= 1

    def substitute_last(self, value: float) -> "MultiPoly":
        """
        Fixes the last variable at ``value``, leaving a polynomial in ``n - 1`` variables.
        """
        if self.n < 2:
            raise DimensionMismatch()
        return MultiPoly(self.n - 1, [(e[:-1], c * value ** e[-1]) for e, c in self._terms])

    def embed(self, extra: int) -> "MultiPoly":
        """
        The same polynomial in ``n + extra`` variables, new variables appended.
        """
        return MultiPoly(self.n + extra, [(e + (0,) * extra, c) for e, c in self._terms])

    def chop(self, rel_tol: float) -> "MultiPoly":
        """
        Drops coefficients below ``rel_tol`` times the largest one.
        """
        cutoff = rel_tol * self.max_abs_coeff()
        return MultiPoly(self.n, [(e, c) for e, c in self._terms if abs(c) > cutoff])


def evaluate(p: MultiPoly, x: Sequence[float]) -> float:
    return p.evaluate(x)


def partial(p: MultiPoly, i: int) -> MultiPoly:
    return p.partial(i)


def weighted_norm(phi: MultiPoly) -> float:
    return phi.weighted_norm()


def coeff_bound_on_box(p: MultiPoly, box: "Box") -> float:
    return p.coeff_bound_on_box(box)


def support(p: MultiPoly) -> set[Exponent]:
    return p.support()


def total_degree(p: MultiPoly) -> int | None:
    return p.total_degree()


@dataclass(frozen=True)
class Box:
    """
    Axis-aligned closed box ``[lo_1, hi_1] x ... x [lo_n, hi_n]``.
    """
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise DimensionMismatch()
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(messages.EMPTY_BOX)

    @classmethod
    def cube(cls, n: int, r: float) -> "Box":
        return cls((-r,) * n, (r,) * n)

    @classmethod
    def around(cls, center: Sequence[float], r: float) -> "Box":
        return cls(tuple(c - r for c in center), tuple(c + r for c in center))

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def radii(self) -> tuple[float, ...]:
        return tuple(max(abs(a), abs(b)) for a, b in zip(self.lo, self.hi))

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def contains(self, x: Sequence[float], slack: float = 0.0) -> bool:
        return all(a - slack <= v <= b + slack for v, a, b in zip(x, self.lo, self.hi))

    def contains_many(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        lo = np.asarray(self.lo) - slack
        hi = np.asarray(self.hi) + slack
        return np.all((points >= lo) & (points <= hi), axis=1)

    def grid(self, per_axis: int, centers: bool = False) -> np.ndarray:
        """
        Tensor grid of ``per_axis ** n`` points, either including the faces
        or at the cell centers.
        """
        axes = []
        for a, b in zip(self.lo, self.hi):
            if centers:
                h = (b - a) / per_axis
                axes.append(a + h * (np.arange(per_axis) + 0.5))
            else:
                axes.append(np.linspace(a, b, per_axis))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(count, self.n))


def power_tables(points: np.ndarray, max_degree: int) -> np.ndarray:
    """
    Returns ``T`` with ``T[p, i, d] = points[p, i] ** d`` for ``d <= max_degree``.
    """
    return points[:, :, None] ** np.arange(max_degree + 1)


class CompiledPoly:
    """
    Array form of a MultiPoly for batch evaluation on precomputed power tables.
    """

    def __init__(self, p: MultiPoly):
        self.n = p.n
        self.exps = np.array([e for e, _ in p.items()], dtype=int).reshape(len(p), p.n)
        self.coeffs = np.array([c for _, c in p.items()], dtype=float)

    def values(self, tables: np.ndarray) -> np.ndarray:
        if self.coeffs.size == 0:
            return np.zeros(tables.shape[0])
        vals = np.ones((tables.shape[0], self.coeffs.size))
        for i in range(self.n):
            vals *= tables[:, i, self.exps[:, i]]
        return vals @ self.coeffs


class CompiledSystem:
    """
    Batch evaluation of a list of polynomials and of their Jacobian matrix.
    """

    def __init__(self, polys: Sequence[MultiPoly]):
        self.n = polys[0].n
        self.max_degree = max(p.max_exponent() for p in polys)
        self._values = [CompiledPoly(p) for p in polys]
        self._jacobian = [[CompiledPoly(p.partial(j)) for j in range(1, self.n + 1)] for p in polys]

    def tables(self, points: np.ndarray) -> np.ndarray:
        return power_tables(np.atleast_2d(points), self.max_degree)

    def values(self, points: np.ndarray, tables: np.ndarray | None = None) -> np.ndarray:
        tables = self.tables(points) if tables is None else tables
        return np.stack([c.values(tables) for c in self._values], axis=1)

    def jacobian(self, points: np.ndarray, tables: np.ndarray | None = None) -> np.ndarray:
        tables = self.tables(points) if tables is None else tables
        rows = [np.stack([c.values(tables) for c in row], axis=1) for row in self._jacobian]
        return np.stack(rows, axis=1)


def degree_order(polys: Sequence[MultiPoly]) -> list[int]:
    """
    Stable permutation that sorts polynomials by ascending total degree.
    """
    return sorted(range(len(polys)), key=lambda i: polys[i].total_degree() or 0)


@dataclass(frozen=True)
class PolySystem:
    """
    Square system ``f_1 = ... = f_n = 0`` with degrees ``m_1 <= ... <= m_n``
    and a distinguished equation index ``ell`` (1-based).
    """
    polys: tuple[MultiPoly, ...]
    ell: int = 1

    def __post_init__(self):
        object.__setattr__(self, "polys", tuple(self.polys))
        if not self.polys:
            raise ValueError(messages.EMPTY_SYSTEM)
        n = len(self.polys)
        if any(p.n != n for p in self.polys):
            raise DimensionMismatch(f"{messages.DIMENSION_MISMATCH}: need {n} polynomials in {n} variables")
        degrees = [p.total_degree() for p in self.polys]
        if any(d is None for d in degrees):
            raise ValueError("Zero polynomial in system")
        if degrees != sorted(degrees):
            raise ValueError(f"{messages.DEGREES_NOT_SORTED}: {degrees}")
        if not 1 <= self.ell <= n:
            raise IndexOutOfRange(messages.ELL_OUT_OF_RANGE)

    @classmethod
    def from_polys(cls, polys: Sequence[MultiPoly], ell: int = 1) -> "PolySystem":
        """
        Builds a system from equations in any order.

        Equations are stably sorted by degree and ``ell`` follows its equation.

        :param polys: The equations.
        :type polys: Sequence[MultiPoly]
        :param ell: The distinguished index in the given order (1-based).
        :type ell: int
        :return: The sorted system.
        :rtype: PolySystem
        """
        order = degree_order(polys)
        if not 1 <= ell <= len(polys):
            raise IndexOutOfRange(messages.ELL_OUT_OF_RANGE)
        return cls(tuple(polys[i] for i in order), order.index(ell - 1) + 1)

    @property
    def n(self) -> int:
        return len(self.polys)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(p.total_degree() for p in self.polys)

    @property
    def f_ell(self) -> MultiPoly:
        return self.polys[self.ell - 1]

    @cached_property
    def jacobian(self) -> list[list[MultiPoly]]:
        return [p.gradient() for p in self.polys]

    @cached_property
    def compiled(self) -> CompiledSystem:
        return CompiledSystem(self.polys)

    def with_polys(self, polys: Sequence[MultiPoly]) -> "PolySystem":
        return PolySystem.from_polys(polys, self.ell)

    def values_at(self, x: Sequence[float]) -> np.ndarray:
        return np.array([p.evaluate(x) for p in self.polys])

    def residual(self, x: Sequence[float]) -> float:
        return float(np.max(np.abs(self.values_at(x))))

    def jacobian_at(self, x: Sequence[float]) -> np.ndarray:
        if len(x) != self.n:
            raise DimensionMismatch()
        return self.compiled.jacobian(np.asarray(x, dtype=float)[None, :])[0]
