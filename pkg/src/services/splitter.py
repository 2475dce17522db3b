"""
Splitting multiple roots into simple ones by polynomial deformations ``f + H``,
multiplicity probes and the sampled closeness conditions between two systems.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.conf import messages
from src.conf.config import Settings, config
from src.services.exceptions import DimensionMismatch, RankDeficient, SplitFailed
from src.services.poly import Box, CompiledSystem, Exponent, MultiPoly, PolySystem, monomials
from src.services.rootfind import Root, RootSet, find_roots

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Deformation:
    """
    A family ``H(x, t)`` evaluated at ``t = magnitude``.

    ``family[i]`` is a polynomial in ``n + 1`` variables whose last variable is ``t``.
    ``support_spec[i]``, when given, lists the exponents ``H_i`` may use.
    """
    family: tuple[MultiPoly, ...]
    magnitude: float
    support_spec: tuple[tuple[Exponent, ...], ...] | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", tuple(self.family))
        if len({p.n for p in self.family}) > 1:
            raise DimensionMismatch()
        if self.support_spec is not None:
            spec = tuple(tuple(tuple(e) for e in row) for row in self.support_spec)
            object.__setattr__(self, "support_spec", spec)
            if len(spec) != len(self.family):
                raise DimensionMismatch()
            for i, (h, allowed) in enumerate(zip(self.H, spec)):
                extra = h.support() - set(allowed)
                if extra:
                    raise ValueError(f"H_{i + 1} uses exponents outside its support: {sorted(extra)}")

    @classmethod
    def linear(cls, shape: Sequence[MultiPoly], magnitude: float, **kwargs) -> "Deformation":
        """
        ``H = t * shape``.
        """
        n = shape[0].n
        t = MultiPoly.variable(n + 1, n + 1)
        return cls(family=tuple(s.embed(1) * t for s in shape), magnitude=magnitude, **kwargs)

    @property
    def n(self) -> int:
        return self.family[0].n - 1

    @property
    def H(self) -> tuple[MultiPoly, ...]:
        return tuple(p.substitute_last(self.magnitude) for p in self.family)

    def at(self, magnitude: float) -> "Deformation":
        return replace(self, magnitude=magnitude)


@dataclass(frozen=True)
class ProbeResult:
    count: int
    counts: tuple[int, ...]
    stable: bool

    def __int__(self) -> int:
        return self.count


@dataclass(frozen=True)
class SplitReport:
    """
    ``assignment[i]`` is the index in ``before`` that after-root ``i`` split from,
    ``None`` for strays.
    """
    before: RootSet
    after: RootSet
    deformation: Deformation
    assignment: tuple[int | None, ...]
    expected: int | None
    multiplicities_known: bool = False
    probes: tuple[ProbeResult, ...] = field(default_factory=tuple)

    @property
    def strays(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.assignment) if a is None)

    @property
    def conservation(self) -> bool | None:
        if self.expected is None:
            return None
        return self.expected == len(self.after.simple)

    @property
    def clusters(self) -> dict[int, list[int]]:
        groups: dict[int, list[int]] = {}
        for i, a in enumerate(self.assignment):
            if a is not None:
                groups.setdefault(a, []).append(i)
        return groups


@dataclass(frozen=True)
class KovReport:
    r: float
    samples: int
    eps_f: float
    eps_F: float
    boundary_distance: float | None
    roots_in_ball: int
    max_cond: float

    @property
    def eps(self) -> float:
        return max(self.eps_f, self.eps_F)

    @property
    def passed(self) -> bool:
        return self.boundary_distance is None or self.eps < self.boundary_distance


def apply_deformation(sys: PolySystem, H: Deformation | Sequence[MultiPoly]) -> PolySystem:
    """
    The system ``f_i + H_i``, rows aligned with ``sys.polys``, re-sorted by degree.
    """
    polys = H.H if isinstance(H, Deformation) else tuple(H)
    if len(polys) != sys.n or any(h.n != sys.n for h in polys):
        raise DimensionMismatch()
    return sys.with_polys([f + h for f, h in zip(sys.polys, polys)])


def assign_roots(before: RootSet, after: RootSet, capacities: Sequence[int], radius: float) -> tuple[int | None, ...]:
    """
    Matches after-roots to before-roots at minimum total distance, each
    before-root taking at most ``capacities[j]`` partners.
    """
    a, b = after.points(), before.points()
    if len(a) == 0 or len(b) == 0:
        return (None,) * len(a)
    owners = np.repeat(np.arange(len(b)), capacities)
    cost = np.linalg.norm(a[:, None, :] - b[owners][None, :, :], axis=-1)
    rows, cols = linear_sum_assignment(cost)
    assignment: list[int | None] = [None] * len(a)
    for i, c in zip(rows, cols):
        if cost[i, c] <= radius:
            assignment[i] = int(owners[c])
    return tuple(assignment)


def split_multiple_roots(sys: PolySystem, H: Deformation, K: Box, cfg: Settings = config,
                         before: RootSet | None = None, refine: bool = False) -> SplitReport:
    """
    Solves ``f + H`` in ``K`` and relates its roots to the multiple roots of ``f``.

    :param sys: System with at least one multiple root in ``K``.
    :type sys: PolySystem
    :param H: The deformation.
    :type H: Deformation
    :param K: The box.
    :type K: Box
    :param before: Roots of ``sys``, solved when omitted.
    :type before: RootSet | None
    :param refine: Probe the multiplicity of every multiple root first.
    :type refine: bool
    :raises SplitFailed: If ``sys`` has no multiple root or ``f + H`` still has one.
    :return: Roots before and after, the assignment and the conservation count.
    :rtype: SplitReport
    """
    before = find_roots(sys, K, cfg) if before is None else before
    if not before.multiple:
        raise SplitFailed(messages.NO_MULTIPLE_ROOTS)
    probes: tuple[ProbeResult, ...] = ()
    if refine:
        before, probes = refine_multiplicities(sys, before, cfg)
    after = find_roots(apply_deformation(sys, H), K, cfg)
    if after.multiple:
        raise SplitFailed(f"{messages.SPLIT_FAILED}: {len(after.multiple)} multiple roots remain")
    known = refine or all(not r.is_multiple for r in before)
    capacities = [r.multiplicity_estimate if known else len(after) for r in before]
    assignment = assign_roots(before, after, capacities, cfg.ASSIGN_RADIUS)
    expected = sum(r.multiplicity_estimate for r in before) if known else None
    report = SplitReport(
        before=before,
        after=after,
        deformation=H,
        assignment=assignment,
        expected=expected,
        multiplicities_known=known,
        probes=probes,
    )
    if report.strays:
        logger.warning("%d roots of the deformed system were not assigned", len(report.strays))
    logger.info("split: %d roots before (%d multiple), %d simple after", len(before), len(before.multiple), len(after))
    return report


def _local_cfg(cfg: Settings) -> Settings:
    return cfg.model_copy(update={"GRID_PER_AXIS": cfg.PROBE_GRID, "RANDOM_STARTS": 4 * cfg.PROBE_GRID})


def count_split_roots(sys: PolySystem, H: Deformation | Sequence[MultiPoly], root: Sequence[float],
                      radius: float | None = None, cfg: Settings = config) -> int:
    """
    Number of simple roots of ``f + H`` within ``radius`` of ``root``.
    """
    radius = cfg.PROBE_RADIUS if radius is None else radius
    center = np.asarray(root, dtype=float)
    local = find_roots(apply_deformation(sys, H), Box.around(center, radius), _local_cfg(cfg))
    return sum(1 for r in local.simple if np.linalg.norm(r.point - center) <= radius)


def _probe_shape(n: int, root: np.ndarray, coeffs: np.ndarray) -> list[MultiPoly]:
    shifted = [MultiPoly.variable(n, j + 1) - float(root[j]) for j in range(n)]
    return [sum((shifted[j] * float(coeffs[i, j]) for j in range(n)), MultiPoly.zero(n)) for i in range(n)]


def multiplicity_probe(sys: PolySystem, root: Sequence[float], cfg: Settings = config,
                       seed: int | None = None) -> ProbeResult:
    """
    Estimates the number of real simple roots a multiple root splits into.

    Random linear deformations ``H_i = eps * sum_j c_ij (x_j - r_j)`` vanish at the
    root; both signs of ``c`` are tried for each seed and each magnitude of
    ``PROBE_MAGNITUDES``. The schedule stops at the first magnitude whose counts
    agree across seeds.

    :param sys: The system.
    :type sys: PolySystem
    :param root: A multiple root.
    :type root: Sequence[float]
    :param seed: Base seed, defaults to ``cfg.SEED``.
    :type seed: int | None
    :return: The largest count seen and whether the counts agreed.
    :rtype: ProbeResult
    """
    seed = cfg.SEED if seed is None else seed
    center = np.asarray(root, dtype=float)
    n = sys.n
    counts: list[int] = []
    stable = False
    for eps in cfg.PROBE_MAGNITUDES:
        per_seed = []
        for s in range(cfg.PROBE_SEEDS):
            coeffs = np.random.default_rng([seed, s]).uniform(-1.0, 1.0, size=(n, n))
            best = 0
            for sign in (1.0, -1.0):
                H = Deformation.linear(_probe_shape(n, center, sign * coeffs), eps)
                best = max(best, count_split_roots(sys, H, center, cfg=cfg))
            per_seed.append(best)
        counts.extend(per_seed)
        if len(set(per_seed)) == 1:
            stable = True
            break
    if not stable:
        logger.warning("multiplicity probe at %s is seed dependent: %s", np.round(center, 6), counts)
    return ProbeResult(count=max(counts), counts=tuple(counts), stable=stable)


def refine_multiplicities(sys: PolySystem, roots: RootSet, cfg: Settings = config) -> tuple[RootSet, tuple[ProbeResult, ...]]:
    """
    Replaces the multiplicity estimate of every multiple root by its probe count.
    """
    probes = []
    refined: list[Root] = []
    for r in roots:
        if r.is_multiple:
            probe = multiplicity_probe(sys, r.x, cfg)
            probes.append(probe)
            refined.append(replace(r, multiplicity_estimate=max(2, probe.count)))
        else:
            refined.append(r)
    return roots.with_roots(refined), tuple(probes)


def default_support(n: int, degree: int = 1) -> tuple[tuple[Exponent, ...], ...]:
    row = tuple(e for d in range(degree + 1) for e in monomials(n, d))
    return (row,) * n


def search_deformation(sys: PolySystem, K: Box, support_spec: Sequence[Sequence[Exponent]] | None = None,
                       cfg: Settings = config, seed: int | None = None,
                       magnitude: float = 0.1) -> SplitReport:
    """
    Random search for a deformation over ``support_spec`` that leaves only simple roots in ``K``.

    Coefficients are uniform in ``[-1, 1]``; the magnitude halves every second
    attempt, up to ``SEARCH_RETRIES`` attempts.

    :raises SplitFailed: If every attempt leaves a multiple root.
    :return: The report of the first successful deformation.
    :rtype: SplitReport
    """
    seed = cfg.SEED if seed is None else seed
    support = tuple(tuple(row) for row in (support_spec or default_support(sys.n)))
    before = find_roots(sys, K, cfg)
    rng = np.random.default_rng(seed)
    for attempt in range(cfg.SEARCH_RETRIES):
        eps = magnitude / 2 ** (attempt // 2)
        shape = [MultiPoly(sys.n, [(e, rng.uniform(-1.0, 1.0)) for e in row]) for row in support]
        H = Deformation.linear(shape, eps, support_spec=support, seed=seed)
        try:
            return split_multiple_roots(sys, H, K, cfg, before=before)
        except SplitFailed as err:
            logger.debug("attempt %d (magnitude %g) failed: %s", attempt, eps, err)
    raise SplitFailed(f"{messages.SPLIT_FAILED} after {cfg.SEARCH_RETRIES} attempts")


def sample_ball(n: int, r: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """
    Uniform points in the Euclidean ball of radius ``r``.
    """
    directions = rng.standard_normal((count, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * (r * rng.uniform(size=(count, 1)) ** (1.0 / n))


def check_kov_conditions(sys: PolySystem, target: PolySystem | Sequence[MultiPoly], r: float,
                         samples: int | None = None, cfg: Settings = config,
                         seed: int | None = None) -> KovReport:
    """
    Monte Carlo estimate of how far ``F`` moves the roots of ``f`` inside the ball ``B_r``.

    ``eps_f`` and ``eps_F`` are the largest components of ``J_f(y)^-1 (F - f)(x)`` and
    ``J_F(y)^-1 (F - f)(x)`` over sampled pairs ``(x, y)``; the check passes when
    ``max(eps_f, eps_F)`` is below the smallest distance ``r - |x|`` of a root
    of ``f`` in the ball to the sphere.

    :param sys: The system ``f``.
    :type sys: PolySystem
    :param target: The system ``F``, rows aligned with ``sys.polys``.
    :type target: PolySystem | Sequence[MultiPoly]
    :param r: Ball radius.
    :type r: float
    :param samples: Number of pairs, defaults to ``KOV_SAMPLES``.
    :type samples: int | None
    :raises RankDeficient: If a sampled Jacobian has condition above ``COND_LIMIT``.
    :return: Both estimates, the boundary distance and the verdict.
    :rtype: KovReport
    """
    target_polys = target.polys if isinstance(target, PolySystem) else tuple(target)
    if len(target_polys) != sys.n or any(p.n != sys.n for p in target_polys):
        raise DimensionMismatch()
    samples = cfg.KOV_SAMPLES if samples is None else samples
    seed = cfg.SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    xs = sample_ball(sys.n, r, samples, rng)
    ys = sample_ball(sys.n, r, samples, rng)

    diff = CompiledSystem([F - f for f, F in zip(sys.polys, target_polys)]).values(xs)
    eps = []
    max_cond = 0.0
    for system in (sys.compiled, CompiledSystem(target_polys)):
        J = system.jacobian(ys)
        cond = np.linalg.cond(J)
        max_cond = max(max_cond, float(np.max(cond)))
        if not np.all(np.isfinite(cond)) or np.max(cond) > cfg.COND_LIMIT:
            raise RankDeficient(f"{messages.RANK_DEFICIENT} (condition {np.max(cond):.3e})")
        components = np.linalg.solve(J, diff[:, :, None])[:, :, 0]
        eps.append(float(np.max(np.abs(components))))

    roots = find_roots(sys, Box.cube(sys.n, r), cfg, seed=seed)
    norms = [float(np.linalg.norm(root.point)) for root in roots if np.linalg.norm(root.point) < r]
    distance = min((r - v for v in norms), default=None)
    report = KovReport(
        r=r,
        samples=samples,
        eps_f=eps[0],
        eps_F=eps[1],
        boundary_distance=distance,
        roots_in_ball=len(norms),
        max_cond=max_cond,
    )
    logger.info("closeness check on B_%g: eps=%.3g, distance=%s, passed=%s", r, report.eps, distance, report.passed)
    return report
