"""
Membership of powers of the maximal ideal in the gradient ideal of ``f_ell``.

Certificates are computed numerically at fixed coefficients: for every
monomial ``M`` of degree ``k`` a least-squares solve over the Macaulay matrix of
shifted partial derivatives yields cofactors ``h_j`` with
``sum_j h_j * df/dx_j = M``.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_form

from src.conf.config import Settings, config
from src.services.exceptions import DegreeMismatch, NotInIdeal
from src.services.poly import Exponent, MultiPoly, PolySystem, grlex_key, monomials

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IdealCertificate:
    """
    Cofactors proving ``m^k`` lies in the gradient ideal of ``f_ell``.

    ``cofactors[s][j]`` multiplies ``df_ell/dx_{j+1}`` in the representation
    of ``monomials[s]``.
    """
    ell: int
    k: int
    mu: int
    monomials: tuple[Exponent, ...]
    cofactors: tuple[tuple[MultiPoly, ...], ...]
    residuals: tuple[float, ...]
    tol: float

    @property
    def residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def cofactor_degree(self) -> int | None:
        degrees = [h.total_degree() for row in self.cofactors for h in row if h]
        return degrees[0] if degrees else None


@dataclass(frozen=True)
class LatticeReport:
    """
    Integer span of the differences of top-degree exponents of ``f_ell``.

    ``index`` is the index of that span inside ``{alpha : sum(alpha) = 0}``,
    ``None`` when the span has lower rank.
    """
    difference_vectors: tuple[tuple[int, ...], ...]
    index: int | None

    @property
    def passed(self) -> bool:
        return self.index == 1


def mu(n: int, k: int) -> int:
    """
    Number of monomials of total degree ``k`` in ``n`` variables.

    :param n: Number of variables, at least 1.
    :type n: int
    :param k: Total degree, at least 0.
    :type k: int
    :return: ``binomial(k + n - 1, n - 1)``.
    :rtype: int
    """
    if n < 1 or k < 0:
        raise ValueError("mu needs n >= 1 and k >= 0")
    return math.comb(k + n - 1, n - 1)


@lru_cache(maxsize=None)
def mu_recursive(n: int, k: int) -> int:
    if n == 1:
        return 1
    return sum(mu_recursive(n - 1, k - i) for i in range(k + 1))


def lattice_necessary_check(f_ell: MultiPoly) -> LatticeReport:
    """
    Computes the index of the lattice spanned by differences of the
    top-degree exponents inside the hyperplane lattice ``sum(alpha) = 0``.

    A difference vector ``v`` with ``sum(v) = 0`` has coordinates
    ``v_1, ..., v_{n-1}`` in the basis ``e_i - e_n``, so the index is the product
    of the Smith invariants of that ``(n-1) x r`` integer matrix.

    :param f_ell: The polynomial whose top-degree support is inspected.
    :type f_ell: MultiPoly
    :return: Difference vectors and index (``None`` for infinite index).
    :rtype: LatticeReport
    """
    degree = f_ell.total_degree()
    top = [e for e, _ in f_ell.homogeneous_part(degree).items()] if degree else []
    if len(top) < 2:
        return LatticeReport(difference_vectors=(), index=None)
    first = top[0]
    diffs = tuple(tuple(a - b for a, b in zip(first, v)) for v in top[1:])
    rank = f_ell.n - 1
    if len(diffs) < rank:
        return LatticeReport(difference_vectors=diffs, index=None)
    coords = Matrix([[d[i] for d in diffs] for i in range(rank)])
    snf = smith_normal_form(coords, domain=ZZ)
    invariants = [abs(int(snf[i, i])) for i in range(rank)]
    index = None if 0 in invariants else math.prod(invariants)
    logger.debug("lattice invariants %s -> index %s", invariants, index)
    return LatticeReport(difference_vectors=diffs, index=index)


def convenient_check(f: MultiPoly) -> bool:
    """
    True when the support holds a pure power ``x_i^b`` (``b >= 1``) of every variable.
    """
    axes = set()
    for exp in f.support():
        nonzero = [i for i, e in enumerate(exp) if e > 0]
        if len(nonzero) == 1:
            axes.add(nonzero[0])
    return len(axes) == f.n


def expansion_residual(gradient: Sequence[MultiPoly], monomial: Exponent, cofactors: Sequence[MultiPoly]) -> float:
    """
    Coefficient sup-norm of ``M - sum_j h_j * df/dx_j`` by polynomial re-expansion.
    """
    n = len(gradient)
    diff = MultiPoly.monomial(n, monomial)
    for h, g in zip(cofactors, gradient):
        diff = diff - h * g
    return diff.max_abs_coeff()


def verify_certificate(cert: IdealCertificate, sys: PolySystem) -> list[float]:
    gradient = sys.polys[cert.ell - 1].gradient()
    return [expansion_residual(gradient, m, row) for m, row in zip(cert.monomials, cert.cofactors)]


def certify_ideal_power(sys: PolySystem, k: int, tol: float | None = None, cfg: Settings = config) -> IdealCertificate:
    """
    Certifies ``m^k`` inside the gradient ideal of ``f_ell`` by homogeneous cofactors.

    The Macaulay matrix has one column per pair (shift ``x^beta`` with
    ``|beta| = k - m_ell + 1``, partial ``df_ell/dx_j``); all ``mu_n(k)`` targets
    are solved at once by minimum-norm least squares.

    :param sys: The system; its ``ell``-th equation is used.
    :type sys: PolySystem
    :param k: The ideal power.
    :type k: int
    :param tol: Maximum accepted residual, defaults to ``CERT_TOL``.
    :type tol: float | None
    :param cfg: Settings for rank cutoff and coefficient chopping.
    :type cfg: Settings
    :raises DegreeMismatch: If ``k < m_ell - 1`` or ``k`` exceeds ``K_CAP``.
    :raises NotInIdeal: If some monomial residual exceeds ``tol``.
    :return: The certificate.
    :rtype: IdealCertificate
    """
    tol = cfg.CERT_TOL if tol is None else tol
    f = sys.f_ell
    n = sys.n
    m = f.total_degree()
    if k < m - 1:
        raise DegreeMismatch(f"k={k} < m_ell - 1 = {m - 1}")
    if k > cfg.K_CAP:
        raise DegreeMismatch(f"k={k} exceeds the configured cap {cfg.K_CAP}")
    d = k - m + 1
    gradient = f.gradient()
    shifts = monomials(n, d)
    targets = monomials(n, k)
    columns = [g.shift(beta) for g in gradient for beta in shifts]

    rows = set(targets)
    for col in columns:
        rows.update(col.support())
    row_index = {e: i for i, e in enumerate(sorted(rows, key=grlex_key, reverse=True))}

    A = np.zeros((len(row_index), len(columns)))
    for j, col in enumerate(columns):
        for e, c in col.items():
            A[row_index[e], j] = c
    B = np.zeros((len(row_index), len(targets)))
    for s, target in enumerate(targets):
        B[row_index[target], s] = 1.0

    solution, *_ = np.linalg.lstsq(A, B, rcond=cfg.RANK_RCOND)

    cofactors = []
    residuals = []
    for s, target in enumerate(targets):
        coeffs = solution[:, s]
        cutoff = cfg.CHOP_TOL * np.max(np.abs(coeffs), initial=0.0)
        row = []
        for j in range(n):
            block = coeffs[j * len(shifts):(j + 1) * len(shifts)]
            row.append(MultiPoly(n, [(beta, c) for beta, c in zip(shifts, block) if abs(c) > cutoff]))
        cofactors.append(tuple(row))
        residuals.append(expansion_residual(gradient, target, row))

    worst = int(np.argmax(residuals))
    if residuals[worst] > tol:
        raise NotInIdeal(targets[worst], residuals[worst])
    logger.info("certified m^%d in gradient ideal of f_%d (residual %.2e)", k, sys.ell, residuals[worst])
    return IdealCertificate(
        ell=sys.ell,
        k=k,
        mu=mu(n, k),
        monomials=tuple(targets),
        cofactors=tuple(cofactors),
        residuals=tuple(residuals),
        tol=tol,
    )


def minimal_k(sys: PolySystem, cap: int | None = None, cfg: Settings = config) -> int | None:
    """
    Smallest ``k <= cap`` for which :func:`certify_ideal_power` succeeds.

    :param sys: The system.
    :type sys: PolySystem
    :param cap: Largest power tried, defaults to ``K_CAP``.
    :type cap: int | None
    :return: The power, or ``None`` when no ``k`` up to ``cap`` works.
    :rtype: int | None
    """
    cap = cfg.K_CAP if cap is None else cap
    if cap > cfg.K_CAP:
        cfg = cfg.model_copy(update={"K_CAP": cap})
    start = max(1, sys.f_ell.total_degree() - 1)
    for k in range(start, cap + 1):
        try:
            certify_ideal_power(sys, k, cfg=cfg)
        except NotInIdeal as err:
            logger.debug("k=%d fails: %s", k, err)
            continue
        return k
    return None


def chain_identity_residual(f: MultiPoly, cofactors: Sequence[MultiPoly], lam: float, monomial: Exponent) -> float:
    """
    Checks ``lam * M = sum_i hbar_i * df/dx_i`` for externally supplied cofactors.

    :return: Coefficient sup-norm of the difference divided by ``|lam|``.
    :rtype: float
    """
    scaled = [h / lam for h in cofactors]
    return expansion_residual(f.gradient(), monomial, scaled)
