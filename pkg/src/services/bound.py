"""
The safe perturbation magnitude ``t* = 1 / (||phi|| * C * mu^2)``.
"""
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from src.conf import messages
from src.conf.config import Settings, config
from src.services.exceptions import BoundError, DimensionMismatch, InvalidPerturbation
from src.services.ideal import IdealCertificate, certify_ideal_power, minimal_k
from src.services.poly import Box, CompiledPoly, MultiPoly, PolySystem, monomials, power_tables

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PerturbationSpec:
    """
    Scalar direction ``phi`` spread over the equations by the first column of ``F``.

    The perturbed system is ``f_i + t * F[i][0] * phi``.
    """
    phi: MultiPoly
    F: tuple[tuple[float, ...], ...]
    k: int | None = None

    def __post_init__(self):
        F = tuple(tuple(float(v) for v in row) for row in self.F)
        object.__setattr__(self, "F", F)
        n = self.phi.n
        if len(F) != n or any(len(row) != n for row in F):
            raise DimensionMismatch(f"{messages.DIMENSION_MISMATCH}: F must be {n}x{n}")
        if not self.phi:
            raise InvalidPerturbation("phi must be a nonzero polynomial")
        if self.k is not None:
            low = min(sum(e) for e in self.phi.support())
            if low < self.k + 1:
                raise InvalidPerturbation(f"{messages.PHI_OUTSIDE_WINDOW} (k={self.k}, lowest degree {low})")

    @classmethod
    def on_rows(cls, phi: MultiPoly, rows: Sequence[int], n: int | None = None, k: int | None = None) -> "PerturbationSpec":
        """
        Builds ``F`` whose first column is the indicator of ``rows`` (1-based),
        completed to an invertible matrix by unit columns.

        :param phi: The direction.
        :type phi: MultiPoly
        :param rows: Equations receiving ``phi``.
        :type rows: Sequence[int]
        :param n: Number of equations, defaults to ``phi.n``.
        :type n: int | None
        :param k: Certified ideal power, checked against the support of ``phi``.
        :type k: int | None
        :return: The perturbation.
        :rtype: PerturbationSpec
        """
        n = phi.n if n is None else n
        if not rows or any(not 1 <= r <= n for r in rows):
            raise InvalidPerturbation(f"rows must be a nonempty subset of 1..{n}")
        pivot = min(rows) - 1
        F = np.zeros((n, n))
        F[[r - 1 for r in rows], 0] = 1.0
        others = [i for i in range(n) if i != pivot]
        for col, i in enumerate(others, start=1):
            F[i, col] = 1.0
        return cls(phi=phi, F=tuple(map(tuple, F)), k=k)

    @property
    def n(self) -> int:
        return self.phi.n

    @property
    def k_prime(self) -> int:
        return self.phi.total_degree()

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.F)

    def phi_vector(self) -> list[MultiPoly]:
        return [self.phi * row[0] for row in self.F]

    def with_k(self, k: int) -> "PerturbationSpec":
        return PerturbationSpec(phi=self.phi, F=self.F, k=k)

    def permuted(self, order: Sequence[int]) -> "PerturbationSpec":
        """
        Re-indexes rows after the equations were reordered by ``order``.
        """
        return PerturbationSpec(phi=self.phi, F=tuple(self.F[i] for i in order), k=self.k)

    def check_invertible(self, cfg: Settings = config) -> float:
        cond = float(np.linalg.cond(self.matrix))
        if not np.isfinite(cond) or cond > cfg.F_COND_LIMIT:
            raise InvalidPerturbation(f"{messages.F_NOT_INVERTIBLE} (cond {cond:.3e})")
        return cond


@dataclass(frozen=True)
class BoundReport:
    norm_phi: float
    C: float
    C_sampled: float
    mu: int
    k: int
    k_prime: int
    t_star: float
    box: Box
    ell: int
    certificate_residual: float


@dataclass(frozen=True)
class InvertibilityCheck:
    invertible: bool
    decided_by: str
    max_entry: float
    threshold: float = field(default=0.0)

    def __bool__(self) -> bool:
        return self.invertible


def _shifts(n: int, top: int) -> list[tuple[int, ...]]:
    return [beta for d in range(top + 1) for beta in monomials(n, d)]


def compute_C(cert: IdealCertificate, K: Box, k: int, k_prime: int) -> float:
    """
    Rigorous upper bound of ``C`` on the box.

    ``C = max_s sum_j sum_{|beta| <= k'-k-1} max_K |h_j^(s) x^beta|`` where every
    maximum is replaced by the absolute-coefficient bound on ``K``.

    :param cert: The ideal certificate.
    :type cert: IdealCertificate
    :param K: The compact set.
    :type K: Box
    :param k: The certified power.
    :type k: int
    :param k_prime: Total degree of ``phi``.
    :type k_prime: int
    :raises BoundError: If ``k' < k + 1``.
    :return: The bound.
    :rtype: float
    """
    if k_prime < k + 1:
        raise BoundError(f"need k' >= k + 1, got k={k}, k'={k_prime}")
    shifts = _shifts(K.n, k_prime - k - 1)
    best = 0.0
    for row in cert.cofactors:
        total = sum(h.shift(beta).coeff_bound_on_box(K) for h in row for beta in shifts)
        best = max(best, total)
    return best


def sampled_C(cert: IdealCertificate, K: Box, k: int, k_prime: int, per_axis: int | None = None,
              cfg: Settings = config) -> float:
    """
    Grid estimate of ``C`` (a lower estimate of the true value, used as a diagnostic).
    """
    per_axis = cfg.C_GRID_PER_AXIS if per_axis is None else per_axis
    points = K.grid(per_axis)
    shifts = _shifts(K.n, k_prime - k - 1)
    top = max([h.max_exponent() for row in cert.cofactors for h in row] + [k_prime - k - 1])
    tables = power_tables(points, top)
    shift_values = [np.abs(CompiledPoly(MultiPoly.monomial(K.n, beta)).values(tables)) for beta in shifts]
    best = 0.0
    for row in cert.cofactors:
        total = 0.0
        for h in row:
            values = np.abs(CompiledPoly(h).values(tables))
            total += sum(float(np.max(values * sv)) for sv in shift_values)
        best = max(best, total)
    return best


def compute_bound(norm_phi: float, C: float, mu: int) -> float:
    """
    :raises BoundError: If a factor is not positive.
    :return: ``1 / (norm_phi * C * mu ** 2)``.
    :rtype: float
    """
    if norm_phi <= 0 or C <= 0 or mu <= 0:
        raise BoundError(f"{messages.NON_POSITIVE_FACTOR}: norm_phi={norm_phi}, C={C}, mu={mu}")
    return 1.0 / (norm_phi * C * mu ** 2)


def lemma1_invertible(A: np.ndarray) -> InvertibilityCheck:
    """
    Decides whether ``id + A`` is invertible.

    Entries strictly below ``1 / mu^2`` in absolute value guarantee it. Otherwise
    the numerical rank of ``id + A`` decides.

    :param A: Square matrix.
    :type A: np.ndarray
    :return: The answer and the path that produced it.
    :rtype: InvertibilityCheck
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch("A must be square")
    size = A.shape[0]
    threshold = 1.0 / size ** 2
    max_entry = float(np.max(np.abs(A))) if A.size else 0.0
    if max_entry < threshold:
        return InvertibilityCheck(True, "hypothesis", max_entry, threshold)
    logger.warning("entries up to %.3g exceed 1/mu^2 = %.3g, using rank test", max_entry, threshold)
    rank = np.linalg.matrix_rank(np.eye(size) + A)
    return InvertibilityCheck(bool(rank == size), "determinant", max_entry, threshold)


def lemma1_invertible_many(As: np.ndarray) -> np.ndarray:
    """
    :func:`lemma1_invertible` over a stack of ``mu x mu`` matrices.

    :param As: Array of shape ``(batch, mu, mu)``.
    :type As: np.ndarray
    :return: Boolean array of shape ``(batch,)``.
    :rtype: np.ndarray
    """
    As = np.asarray(As, dtype=float)
    if As.ndim != 3 or As.shape[1] != As.shape[2]:
        raise DimensionMismatch("expected a stack of square matrices")
    size = As.shape[1]
    ok = np.max(np.abs(As), axis=(1, 2)) < 1.0 / size ** 2
    rest = ~ok
    if np.any(rest):
        logger.warning("%d matrices exceed 1/mu^2, using rank test", int(np.count_nonzero(rest)))
        ok[rest] = np.linalg.matrix_rank(np.eye(size) + As[rest]) == size
    return ok


def assemble_bound(sys: PolySystem, pert: PerturbationSpec, K: Box, k: int | None = None,
                   cfg: Settings = config) -> tuple[BoundReport, IdealCertificate]:
    """
    Certifies ``m^k`` for ``f_ell`` and assembles ``t*`` on ``K``.

    When neither ``k`` nor ``pert.k`` is given the smallest certifiable power is used.

    :raises NotInIdeal: If no certificate exists for the requested power.
    :raises InvalidPerturbation: If ``phi`` is outside the window or ``F`` is singular.
    :return: The report and the certificate it was built from.
    :rtype: tuple[BoundReport, IdealCertificate]
    """
    if K.n != sys.n or pert.n != sys.n:
        raise DimensionMismatch()
    k = k if k is not None else pert.k
    if k is None:
        k = minimal_k(sys, cfg=cfg)
        if k is None:
            # raises NotInIdeal with the worst monomial at the cap
            certify_ideal_power(sys, cfg.K_CAP, cfg=cfg)
    pert = pert.with_k(k)
    pert.check_invertible(cfg)
    cert = certify_ideal_power(sys, k, cfg=cfg)
    norm = pert.phi.weighted_norm()
    C = compute_C(cert, K, k, pert.k_prime)
    report = BoundReport(
        norm_phi=norm,
        C=C,
        C_sampled=sampled_C(cert, K, k, pert.k_prime, cfg=cfg),
        mu=cert.mu,
        k=k,
        k_prime=pert.k_prime,
        t_star=compute_bound(norm, C, cert.mu),
        box=K,
        ell=sys.ell,
        certificate_residual=cert.residual,
    )
    logger.info("t* = %.6g (||phi||=%g, C=%g, mu=%d)", report.t_star, norm, C, cert.mu)
    return report, cert


def _xi_split(dphi: MultiPoly, targets: Sequence[tuple[int, ...]]) -> list[MultiPoly]:
    """
    Writes ``dphi = sum_c xi_c * M_c`` by giving every term to the first ``M_c`` dividing it.
    """
    n = dphi.n
    parts: list[list] = [[] for _ in targets]
    for exp, coeff in dphi.items():
        for c, target in enumerate(targets):
            if all(a >= b for a, b in zip(exp, target)):
                parts[c].append((tuple(a - b for a, b in zip(exp, target)), coeff))
                break
        else:
            raise InvalidPerturbation(messages.PHI_OUTSIDE_WINDOW)
    return [MultiPoly(n, terms) for terms in parts]


def deformation_polys(cert: IdealCertificate, pert: PerturbationSpec) -> list[list[MultiPoly]]:
    """
    Polynomials ``g[s][c] = sum_lam h_lam^(s) * xi_lam^(c)`` where ``xi_lam`` splits
    ``d(phi_ell)/dx_lam`` over the degree-``k`` monomials.
    """
    phi_ell = pert.phi * pert.F[cert.ell - 1][0]
    n = pert.n
    xi = [_xi_split(phi_ell.partial(lam), cert.monomials) for lam in range(1, n + 1)]
    g = []
    for row in cert.cofactors:
        g.append([
            sum((row[lam] * xi[lam][c] for lam in range(n)), MultiPoly.zero(n))
            for c in range(len(cert.monomials))
        ])
    return g


def deformation_matrix(cert: IdealCertificate, pert: PerturbationSpec, x: Sequence[float]) -> np.ndarray:
    """
    Evaluates the ``mu x mu`` coupling matrix at ``x``.

    For ``tau < t*`` every entry of ``tau * A(x)`` on ``K`` stays below ``1/mu^2``.
    """
    return np.array([[p.evaluate(x) for p in row] for row in deformation_polys(cert, pert)])


def deformation_matrix_bound(cert: IdealCertificate, pert: PerturbationSpec, K: Box) -> float:
    """
    Coefficient bound of ``max_K |A|``; never exceeds ``|F[ell][0]| * ||phi|| * C``.
    """
    return max(p.coeff_bound_on_box(K) for row in deformation_polys(cert, pert) for p in row)
