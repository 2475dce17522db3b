"""
Real roots of square polynomial systems in a box.

Roots are found by vectorised multistart damped Newton. Endpoints with a
numerically singular Jacobian are clustered and refined by iterated deflation
(augmenting the system with ``J(x) B lam = 0``, ``h . lam = 1``) until the
augmented system is regular.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from src.conf.config import Settings, config
from src.services.exceptions import DimensionMismatch
from src.services.poly import Box, CompiledSystem, MultiPoly, PolySystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Root:
    """
    A verified real root.

    ``multiplicity_estimate`` is 1 for simple roots and at least 2 for roots with
    a singular Jacobian; the exact count comes from the splitting probe.
    """
    x: tuple[float, ...]
    residual: float
    jf_value: float
    singularity_ratio: float
    multiplicity_estimate: int = 1
    cluster_members: int = 1

    @property
    def is_multiple(self) -> bool:
        return self.multiplicity_estimate > 1

    @property
    def kind(self) -> str:
        return "multiple" if self.is_multiple else "simple"

    @property
    def point(self) -> np.ndarray:
        return np.asarray(self.x)


@dataclass(frozen=True)
class SolverDiagnostics:
    starts: int = 0
    iterations: int = 0
    accepted: int = 0
    no_convergence: int = 0
    merges: int = 0
    deflations: int = 0


@dataclass(frozen=True)
class RootSet:
    roots: tuple[Root, ...]
    box: Box
    diagnostics: SolverDiagnostics = field(default_factory=SolverDiagnostics)
    seed: int = 0

    def __len__(self) -> int:
        return len(self.roots)

    def __iter__(self) -> Iterator[Root]:
        return iter(self.roots)

    @property
    def simple(self) -> tuple[Root, ...]:
        return tuple(r for r in self.roots if not r.is_multiple)

    @property
    def multiple(self) -> tuple[Root, ...]:
        return tuple(r for r in self.roots if r.is_multiple)

    def points(self) -> np.ndarray:
        if not self.roots:
            return np.zeros((0, self.box.n))
        return np.array([r.x for r in self.roots])

    def with_roots(self, roots: Sequence[Root]) -> "RootSet":
        return replace(self, roots=tuple(sort_roots(roots)))

    def to_rows(self, variables: Sequence[str] | None = None) -> list[dict]:
        """
        One flat dict per root for CSV export.
        """
        names = list(variables) if variables else [f"x{i + 1}" for i in range(self.box.n)]
        rows = []
        for r in self.roots:
            row = dict(zip(names, r.x))
            row.update(residual=r.residual, jf=r.jf_value, kind=r.kind, multiplicity=r.multiplicity_estimate)
            rows.append(row)
        return rows


@dataclass(frozen=True)
class QjfPartition:
    simple: tuple[Root, ...]
    multiple: tuple[Root, ...]

    @property
    def q_jf_empty(self) -> bool:
        return not self.multiple


def sort_roots(roots: Sequence[Root]) -> list[Root]:
    return sorted(roots, key=lambda r: tuple(round(v, 8) for v in r.x))


def jacobian_det(sys: PolySystem, x: Sequence[float]) -> float:
    """
    Value of the Jacobian function ``det(df_i/dx_j)`` at ``x``.

    :param sys: The system.
    :type sys: PolySystem
    :param x: The point.
    :type x: Sequence[float]
    :raises DimensionMismatch: If ``len(x) != n``.
    :return: The determinant.
    :rtype: float
    """
    return float(np.linalg.det(sys.jacobian_at(x)))


def singularity_ratio(J: np.ndarray) -> np.ndarray:
    """
    ``|det J| / prod_i max(||row_i||, 1)`` for one matrix or a stack of them.
    """
    scale = np.prod(np.maximum(np.linalg.norm(J, axis=-1), 1.0), axis=-1)
    return np.abs(np.linalg.det(J)) / scale


def _newton_batch(system: CompiledSystem, starts: np.ndarray, far: float, cfg: Settings) -> tuple[np.ndarray, int]:
    """
    Damped Newton with Armijo backtracking on every start at once.

    A start stops on a zero residual, a negligible step, a failed line search
    or divergence beyond ``far``.
    """
    x = starts.copy()
    values = system.values(x)
    norms = np.linalg.norm(values, axis=1)
    active = np.ones(len(x), dtype=bool)
    iterations = 0
    for _ in range(cfg.NEWTON_MAX_ITER):
        idx = np.flatnonzero(active & (norms > 0))
        if idx.size == 0:
            break
        iterations += 1
        J = system.jacobian(x[idx])
        steps = -np.einsum("pij,pj->pi", np.linalg.pinv(J), values[idx])
        lam = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        trial_x = x[idx].copy()
        trial_values = values[idx].copy()
        for _ in range(13):
            pending = np.flatnonzero(~accepted)
            if pending.size == 0:
                break
            candidate = x[idx[pending]] + lam[pending, None] * steps[pending]
            cand_values = system.values(candidate)
            ok = np.linalg.norm(cand_values, axis=1) <= (1 - cfg.ARMIJO_C * lam[pending]) * norms[idx[pending]]
            hit = pending[ok]
            trial_x[hit] = candidate[ok]
            trial_values[hit] = cand_values[ok]
            accepted[hit] = True
            lam[pending[~ok]] *= 0.5
        moved = np.linalg.norm(trial_x - x[idx], axis=1)
        x[idx] = trial_x
        values[idx] = trial_values
        norms[idx] = np.linalg.norm(trial_values, axis=1)
        stop = (~accepted) | (moved <= 1e-15 * (1 + np.linalg.norm(trial_x, axis=1)))
        stop |= np.max(np.abs(trial_x), axis=1) > far
        active[idx[stop]] = False
    return x, iterations


def _polish(sys: PolySystem, x: np.ndarray, steps: int = 3) -> np.ndarray:
    best, best_res = x, sys.residual(x)
    for _ in range(steps):
        if best_res == 0.0:
            break
        try:
            x = x - np.linalg.solve(sys.jacobian_at(x), sys.values_at(x))
        except np.linalg.LinAlgError:
            break
        res = sys.residual(x)
        if res < best_res:
            best, best_res = x, res
    return best


def _gauss_newton(system: CompiledSystem, y: np.ndarray, max_iter: int = 50) -> np.ndarray:
    best = y
    best_norm = np.linalg.norm(system.values(y)[0])
    for _ in range(max_iter):
        F = system.values(y)[0]
        J = system.jacobian(y)[0]
        step = np.linalg.lstsq(J, F, rcond=None)[0]
        y = y - step
        norm = np.linalg.norm(system.values(y)[0])
        if norm < best_norm:
            best, best_norm = y, norm
        if np.linalg.norm(step) <= 1e-15 * (1 + np.linalg.norm(y)):
            break
    return best


class Deflator:
    """
    Iterated deflation of a singular root.

    Each stage appends ``sum_j dG_i/dy_j (B lam)_j = 0`` for every equation and
    ``h . lam = 1`` with random ``B``, ``h``; ``lam`` has ``rank(J) + 1`` entries.
    Stages are cached by the rank sequence, so roots of one system share work.
    """

    def __init__(self, polys: Sequence[MultiPoly], seed: int, cfg: Settings = config):
        self.base = list(polys)
        self.n = self.base[0].n
        self.seed = seed
        self.cfg = cfg
        self._stages: dict[tuple[int, ...], tuple[list[MultiPoly], CompiledSystem, np.ndarray, np.ndarray]] = {}
        self._base_system = CompiledSystem(self.base)

    def _stage(self, key: tuple[int, ...], polys: list[MultiPoly]):
        if key in self._stages:
            return self._stages[key]
        N = polys[0].n
        c = key[-1] + 1
        rng = np.random.default_rng([self.seed, len(key), *key])
        B = rng.standard_normal((N, c))
        h = rng.standard_normal(c)
        total = N + c
        lam = [MultiPoly.variable(total, N + l + 1) for l in range(c)]
        w = [sum((lam[l] * B[j, l] for l in range(c)), MultiPoly.zero(total)) for j in range(N)]
        augmented = [g.embed(c) for g in polys]
        for g in polys:
            row = MultiPoly.zero(total)
            for j in range(N):
                dg = g.partial(j + 1)
                if dg:
                    row = row + dg.embed(c) * w[j]
            augmented.append(row)
        augmented.append(sum((lam[l] * h[l] for l in range(c)), MultiPoly.zero(total)) - 1.0)
        stage = (augmented, CompiledSystem(augmented), B, h)
        self._stages[key] = stage
        logger.debug("deflation stage %s: %d equations in %d unknowns", key, len(augmented), total)
        return stage

    def refine(self, x0: np.ndarray) -> tuple[np.ndarray, int]:
        """
        Refines an approximate singular root.

        :return: The refined point and the number of deflation stages used.
        :rtype: tuple[np.ndarray, int]
        """
        y = np.asarray(x0, dtype=float)
        polys, system = self.base, self._base_system
        key: tuple[int, ...] = ()
        for depth in range(self.cfg.MAX_DEFLATIONS):
            N = y.size
            J = system.jacobian(y)[0]
            s = np.linalg.svd(J, compute_uv=False)
            rank = int(np.sum(s > self.cfg.DEFLATION_RANK_TOL * s[0])) if s[0] > 0 else 0
            if depth == 0:
                rank = min(rank, N - 1)
            elif rank == N:
                break
            key = key + (rank,)
            polys, system, B, h = self._stage(key, polys)
            rhs = np.zeros(J.shape[0] + 1)
            rhs[-1] = 1.0
            lam0 = np.linalg.lstsq(np.vstack([J @ B, h[None, :]]), rhs, rcond=None)[0]
            y = _gauss_newton(system, np.concatenate([y, lam0]))
        return y[:self.n], len(key)


def _greedy_clusters(points: np.ndarray, radius: float) -> list[list[int]]:
    reps: list[np.ndarray] = []
    members: list[list[int]] = []
    for i, p in enumerate(points):
        if reps:
            d = np.linalg.norm(np.asarray(reps) - p, axis=1)
            j = int(np.argmin(d))
            if d[j] <= radius:
                members[j].append(i)
                continue
        reps.append(p)
        members.append([i])
    return members


def find_roots(sys: PolySystem, K: Box, cfg: Settings = config, seed: int | None = None) -> RootSet:
    """
    Finds all real roots of ``sys`` in ``K``.

    Starts are the cell centers of a ``GRID_PER_AXIS`` grid plus ``RANDOM_STARTS``
    uniform points drawn with ``seed``. Endpoints with residual up to
    ``MULTIPLE_ROOT_TOL`` inside ``K`` are kept; regular ones are polished and
    merged within ``DEDUP_RADIUS``, singular ones are merged within
    ``CLUSTER_RADIUS`` and refined by deflation.

    :param sys: The system.
    :type sys: PolySystem
    :param K: The box.
    :type K: Box
    :param cfg: Solver settings.
    :type cfg: Settings
    :param seed: Seed for the random starts, defaults to ``cfg.SEED``.
    :type seed: int | None
    :raises DimensionMismatch: If the box and the system differ in dimension.
    :return: The roots in deterministic order; may be empty.
    :rtype: RootSet
    """
    if K.n != sys.n:
        raise DimensionMismatch()
    seed = cfg.SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    starts = np.vstack([K.grid(cfg.GRID_PER_AXIS, centers=True), K.sample(cfg.RANDOM_STARTS, rng)])
    far = 1e3 * (1.0 + max(K.radii))
    system = sys.compiled
    ends, iterations = _newton_batch(system, starts, far, cfg)

    residuals = np.max(np.abs(system.values(ends)), axis=1)
    keep = (residuals <= cfg.MULTIPLE_ROOT_TOL) & K.contains_many(ends)
    ends = ends[keep]
    ratios = singularity_ratio(system.jacobian(ends)) if len(ends) else np.zeros(0)
    logger.debug("%d of %d starts converged in %d iterations", len(ends), len(starts), iterations)

    residuals = residuals[keep]
    regular = ratios > cfg.SINGULAR_TOL
    singular_pts = list(ends[~regular])
    regular_ends, regular_res = ends[regular], residuals[regular]
    merges = 0
    candidates: list[tuple[np.ndarray, int]] = []
    for cluster in _greedy_clusters(regular_ends, cfg.DEDUP_RADIUS):
        best = _polish(sys, regular_ends[cluster[int(np.argmin(regular_res[cluster]))]])
        if singularity_ratio(sys.jacobian_at(best)) <= cfg.SINGULAR_TOL:
            singular_pts.extend(regular_ends[cluster])
            continue
        merges += len(cluster) - 1
        candidates.append((best, len(cluster)))

    roots: list[Root] = []
    multiple_pts: list[np.ndarray] = []
    deflations = 0
    if singular_pts:
        deflator = Deflator(sys.polys, seed, cfg)
        singular_arr = np.asarray(singular_pts)
        for cluster in _greedy_clusters(singular_arr, cfg.CLUSTER_RADIUS):
            center = singular_arr[cluster].mean(axis=0)
            refined, stages = deflator.refine(center)
            deflations += stages
            if sys.residual(refined) > cfg.MULTIPLE_ROOT_TOL or np.linalg.norm(refined - center) > cfg.CLUSTER_RADIUS:
                logger.warning("deflation did not improve the cluster at %s", np.round(center, 6))
                refined = center
            if any(np.linalg.norm(refined - q) <= cfg.CLUSTER_RADIUS for q in multiple_pts):
                merges += len(cluster)
                continue
            multiple_pts.append(refined)
            merges += len(cluster) - 1
            J = sys.jacobian_at(refined)
            roots.append(Root(
                x=tuple(float(v) for v in refined),
                residual=sys.residual(refined),
                jf_value=float(np.linalg.det(J)),
                singularity_ratio=float(singularity_ratio(J)),
                multiplicity_estimate=2,
                cluster_members=len(cluster),
            ))

    regular_pts: list[np.ndarray] = []
    for best, members in candidates:
        if any(np.linalg.norm(best - q) <= cfg.CLUSTER_RADIUS for q in multiple_pts):
            continue
        if any(np.linalg.norm(best - q) <= cfg.DEDUP_RADIUS for q in regular_pts):
            merges += members
            continue
        regular_pts.append(best)
        J = sys.jacobian_at(best)
        roots.append(Root(
            x=tuple(float(v) for v in best),
            residual=sys.residual(best),
            jf_value=float(np.linalg.det(J)),
            singularity_ratio=float(singularity_ratio(J)),
            cluster_members=members,
        ))

    diagnostics = SolverDiagnostics(
        starts=len(starts),
        iterations=iterations,
        accepted=int(keep.sum()),
        no_convergence=int((~keep).sum()),
        merges=merges,
        deflations=deflations,
    )
    logger.info("found %d roots (%d multiple) in box", len(roots), len(multiple_pts))
    return RootSet(roots=tuple(sort_roots(roots)), box=K, diagnostics=diagnostics, seed=seed)


def classify_q_jf(sys: PolySystem, roots: RootSet, tol: float | None = None, cfg: Settings = config) -> QjfPartition:
    """
    Splits roots into simple and multiple by the scaled Jacobian determinant.

    A root is multiple when ``|jf(x)| <= tol * prod_i max(||grad f_i(x)||, 1)``.
    """
    tol = cfg.SINGULAR_TOL if tol is None else tol
    simple, multiple = [], []
    for r in roots:
        if singularity_ratio(sys.jacobian_at(r.x)) <= tol:
            multiple.append(r if r.is_multiple else replace(r, multiplicity_estimate=2))
        else:
            simple.append(r if not r.is_multiple else replace(r, multiplicity_estimate=1))
    return QjfPartition(simple=tuple(simple), multiple=tuple(multiple))


def check_group_invariance(roots: RootSet | Sequence[Sequence[float]], generators: Sequence[Sequence[int]],
                           radius: float | None = None, cfg: Settings = config) -> bool:
    """
    True when every sign-flip generator maps the root set onto itself.

    :param roots: Roots or plain points.
    :param generators: Per-coordinate sign patterns such as ``(-1, -1, 1)``.
    :param radius: Matching radius, defaults to ``DEDUP_RADIUS``.
    :return: Setwise invariance within ``radius``.
    :rtype: bool
    """
    radius = cfg.DEDUP_RADIUS if radius is None else radius
    points = roots.points() if isinstance(roots, RootSet) else np.asarray(roots, dtype=float)
    if points.size == 0:
        return True
    for g in generators:
        g = np.asarray(g, dtype=float)
        if g.size != points.shape[1]:
            raise DimensionMismatch()
        images = points * g
        for p in images:
            if np.min(np.linalg.norm(points - p, axis=1)) > radius:
                logger.debug("image %s of generator %s has no partner", p, g)
                return False
    return True


def finite_difference_det(sys: PolySystem, x: Sequence[float], h: float = 1e-6) -> float:
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(sys.n):
        e = np.zeros(sys.n)
        e[j] = h
        cols.append((sys.values_at(x + e) - sys.values_at(x - e)) / (2 * h))
    return float(np.linalg.det(np.column_stack(cols)))


def min_pairwise_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return math.inf
    diff = points[:, None, :] - points[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    return float(np.min(d[np.triu_indices(len(points), 1)]))
