"""
Predictor-corrector continuation of roots along ``f + tau * d``.
"""
import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.conf import messages
from src.conf.config import Settings, config
from src.services.bound import PerturbationSpec
from src.services.exceptions import DimensionMismatch
from src.services.poly import Box, CompiledSystem, MultiPoly, PolySystem
from src.services.rootfind import RootSet, find_roots, singularity_ratio

logger = logging.getLogger(__name__)


class TrackStatus(str, enum.Enum):
    COMPLETED = "Completed"
    CRASH_SUSPECTED = "CrashSuspected"
    LEFT_BOX = "LeftBox"
    SINGULAR_JACOBIAN = "SingularJacobian"


@dataclass(frozen=True)
class PathPoint:
    tau: float
    x: tuple[float, ...]
    jf_value: float
    step: float
    residual: float


@dataclass(frozen=True)
class TrackReport:
    start: tuple[float, ...]
    end: tuple[float, ...]
    path: tuple[PathPoint, ...]
    status: TrackStatus
    tau_start: float
    tau_end: float

    @property
    def completed(self) -> bool:
        return self.status == TrackStatus.COMPLETED

    @property
    def min_abs_jf(self) -> float:
        return min(abs(p.jf_value) for p in self.path)

    @property
    def max_residual(self) -> float:
        return max(p.residual for p in self.path)

    def to_rows(self, variables: Sequence[str] | None = None) -> list[dict]:
        names = list(variables) if variables else [f"x{i + 1}" for i in range(len(self.start))]
        rows = []
        for p in self.path:
            row = {"tau": p.tau}
            row.update(zip(names, p.x))
            row["jf"] = p.jf_value
            rows.append(row)
        return rows


@dataclass(frozen=True)
class CrashSuspect:
    first: int
    second: int | None
    tau: float
    distance: float
    reason: str


@dataclass(frozen=True)
class InvarianceReport:
    t: float
    t_star: float | None
    before: RootSet
    after: RootSet
    tracks: tuple[TrackReport, ...]
    bijection: bool
    max_match_distance: float
    min_separation: float
    crashes: tuple[CrashSuspect, ...]

    @property
    def count_before(self) -> int:
        return len(self.before.simple)

    @property
    def count_after(self) -> int:
        return len(self.after.simple)

    @property
    def counts_equal(self) -> bool:
        return self.count_before == self.count_after

    @property
    def below_bound(self) -> bool | None:
        return None if self.t_star is None else self.t < self.t_star


class Homotopy:
    """
    ``H(x, tau) = f(x) + tau * d(x)`` with batch-compiled values and Jacobians.
    """

    def __init__(self, polys: Sequence[MultiPoly], direction: Sequence[MultiPoly]):
        if len(polys) != len(direction) or any(d.n != polys[0].n for d in direction):
            raise DimensionMismatch()
        self.n = polys[0].n
        self.base = CompiledSystem(polys)
        self.direction = CompiledSystem(direction)

    def values(self, x: np.ndarray, tau: float) -> np.ndarray:
        return self.base.values(x)[0] + tau * self.direction.values(x)[0]

    def jacobian(self, x: np.ndarray, tau: float) -> np.ndarray:
        return self.base.jacobian(x)[0] + tau * self.direction.jacobian(x)[0]

    def tangent(self, x: np.ndarray, tau: float) -> np.ndarray:
        return np.linalg.solve(self.jacobian(x, tau), -self.direction.values(x)[0])

    def correct(self, x: np.ndarray, tau: float, cfg: Settings) -> tuple[np.ndarray, int, bool]:
        """
        Newton on ``H(., tau) = 0``; fails when the updates stop contracting.
        """
        previous = math.inf
        for it in range(1, cfg.CORRECTOR_MAX_ITER + 1):
            try:
                delta = np.linalg.solve(self.jacobian(x, tau), self.values(x, tau))
            except np.linalg.LinAlgError:
                return x, it, False
            size = float(np.linalg.norm(delta))
            if it > 1 and size > 0.5 * previous and size > 1e-13 * (1 + np.linalg.norm(x)):
                return x, it, False
            x = x - delta
            previous = size
            residual = np.max(np.abs(self.values(x, tau)))
            if residual <= cfg.CORRECTOR_TOL:
                return x, it, True
            # stagnation at rounding level
            if size <= 1e-14 * (1 + np.linalg.norm(x)):
                return x, it, bool(residual <= 100 * cfg.CORRECTOR_TOL)
        return x, cfg.CORRECTOR_MAX_ITER, False


def deformed_system(sys: PolySystem, pert: PerturbationSpec, tau: float) -> PolySystem:
    """
    The system ``f_i + tau * F[i][0] * phi``, re-sorted by degree.

    :param sys: The unperturbed system.
    :type sys: PolySystem
    :param pert: The perturbation, rows aligned with ``sys.polys``.
    :type pert: PerturbationSpec
    :param tau: The magnitude, at least 0.
    :type tau: float
    :return: The deformed system.
    :rtype: PolySystem
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if pert.n != sys.n:
        raise DimensionMismatch()
    return sys.with_polys([f + p * tau for f, p in zip(sys.polys, pert.phi_vector())])


def track_direction(polys: Sequence[MultiPoly] | PolySystem, direction: Sequence[MultiPoly], root: Sequence[float],
                    tau0: float, tau1: float, K: Box | None = None, cfg: Settings = config) -> TrackReport:
    """
    Follows the root of ``f + tau * d`` through ``root`` from ``tau0`` to ``tau1``.

    Euler predictor on ``J(x, tau) x' = -d(x)`` and Newton corrector. The step
    starts at ``|tau1 - tau0| * INITIAL_STEP_FRACTION``, doubles after corrections
    needing at most three iterations and halves on failure.

    :param polys: Equations ``f``.
    :param direction: The direction ``d``, aligned with ``polys``.
    :param root: A root of ``f + tau0 * d``.
    :param tau0: Start parameter.
    :param tau1: End parameter, may be below ``tau0``.
    :param K: Box the path must stay in; ``None`` disables the check.
    :param cfg: Tracker settings.
    :return: The path and its status.
    :rtype: TrackReport
    """
    polys = polys.polys if isinstance(polys, PolySystem) else list(polys)
    homotopy = Homotopy(polys, direction)
    x = np.asarray(root, dtype=float)
    if x.size != homotopy.n:
        raise DimensionMismatch()
    tau = tau0
    span = abs(tau1 - tau0)
    sign = 1.0 if tau1 >= tau0 else -1.0
    step = span * cfg.INITIAL_STEP_FRACTION
    J = homotopy.jacobian(x, tau)
    path = [PathPoint(tau, tuple(x), float(np.linalg.det(J)), 0.0, float(np.max(np.abs(homotopy.values(x, tau)))))]
    status = TrackStatus.COMPLETED
    while sign * (tau1 - tau) > 0:
        if np.linalg.cond(J) > cfg.COND_LIMIT:
            status = TrackStatus.SINGULAR_JACOBIAN
            break
        remaining = abs(tau1 - tau)
        h = min(step, remaining)
        target = tau1 if h == remaining else tau + sign * h
        try:
            predicted = x + (target - tau) * homotopy.tangent(x, tau)
        except np.linalg.LinAlgError:
            status = TrackStatus.SINGULAR_JACOBIAN
            break
        corrected, iterations, ok = homotopy.correct(predicted, target, cfg)
        if not ok:
            step = h / 2
            logger.debug("corrector failed at tau=%.6g, step -> %.3g", target, step)
            if step < cfg.STEP_FLOOR:
                status = TrackStatus.SINGULAR_JACOBIAN
                break
            continue
        x, tau = corrected, target
        J = homotopy.jacobian(x, tau)
        path.append(PathPoint(tau, tuple(x), float(np.linalg.det(J)), h,
                              float(np.max(np.abs(homotopy.values(x, tau))))))
        if K is not None and not K.contains(x):
            status = TrackStatus.LEFT_BOX
            break
        if singularity_ratio(J) <= cfg.SINGULAR_TOL:
            status = TrackStatus.SINGULAR_JACOBIAN
            break
        if iterations <= 3:
            step = 2 * h
    if status != TrackStatus.COMPLETED:
        logger.warning("path from %s stopped at tau=%.6g: %s", np.round(root, 6), tau, status.value)
    return TrackReport(
        start=tuple(float(v) for v in root),
        end=tuple(float(v) for v in x),
        path=tuple(path),
        status=status,
        tau_start=tau0,
        tau_end=tau,
    )


def track_path(sys: PolySystem, pert: PerturbationSpec, root: Sequence[float], t: float, K: Box | None = None,
               cfg: Settings = config) -> TrackReport:
    """
    Tracks a simple root of ``sys`` along ``f + tau * F (phi, 0, ..., 0)^T`` for ``tau`` in ``[0, t]``.
    """
    return track_direction(sys.polys, pert.phi_vector(), root, 0.0, t, K, cfg)


def track_between(sys: PolySystem, target: Sequence[MultiPoly], root: Sequence[float], K: Box | None = None,
                  cfg: Settings = config) -> TrackReport:
    """
    Continues a root of ``f`` into a root of ``F`` along ``f + tau (F - f)``, ``tau`` in ``[0, 1]``.

    :param target: Equations ``F``, aligned with ``sys.polys``.
    """
    if len(target) != sys.n:
        raise DimensionMismatch()
    direction = [F - f for f, F in zip(sys.polys, target)]
    return track_direction(sys.polys, direction, root, 0.0, 1.0, K, cfg)


def resample_path(report: TrackReport, taus: Sequence[float]) -> np.ndarray:
    """
    Linear interpolation of the path coordinates at ``taus``.
    """
    ts = np.array([p.tau for p in report.path])
    xs = np.array([p.x for p in report.path])
    if ts[0] > ts[-1]:
        ts, xs = ts[::-1], xs[::-1]
    return np.column_stack([np.interp(taus, ts, xs[:, i]) for i in range(xs.shape[1])])


def _common_grid(reports: Sequence[TrackReport], points: int) -> np.ndarray:
    lo = max(min(r.tau_start, r.tau_end) for r in reports)
    hi = min(max(r.tau_start, r.tau_end) for r in reports)
    if hi <= lo:
        return np.array([lo])
    return np.linspace(lo, hi, points)


def detect_crash(reports: Sequence[TrackReport], radius: float | None = None, cfg: Settings = config) -> list[CrashSuspect]:
    """
    Flags paths that come within ``radius`` of each other on a common ``tau`` grid
    and paths whose ``|jf|`` drops below ``SINGULAR_TOL``.

    :param reports: Tracked paths.
    :param radius: Collision radius, defaults to ``CLUSTER_RADIUS``.
    :return: Suspected collisions; empty for a healthy family.
    :rtype: list[CrashSuspect]
    """
    radius = cfg.CLUSTER_RADIUS if radius is None else radius
    suspects = []
    for i, r in enumerate(reports):
        worst = min(r.path, key=lambda p: abs(p.jf_value))
        if abs(worst.jf_value) < cfg.SINGULAR_TOL or r.status == TrackStatus.SINGULAR_JACOBIAN:
            suspects.append(CrashSuspect(i, None, worst.tau, 0.0, "jacobian"))
    if len(reports) < 2:
        return suspects
    taus = _common_grid(reports, cfg.RESAMPLE_POINTS)
    sampled = [resample_path(r, taus) for r in reports]
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            d = np.linalg.norm(sampled[i] - sampled[j], axis=1)
            k = int(np.argmin(d))
            if d[k] < radius:
                suspects.append(CrashSuspect(i, j, float(taus[k]), float(d[k]), "collision"))
    if suspects:
        logger.warning("%d crash suspects", len(suspects))
    return suspects


def min_separation(reports: Sequence[TrackReport], cfg: Settings = config) -> float:
    if len(reports) < 2:
        return math.inf
    taus = _common_grid(reports, cfg.RESAMPLE_POINTS)
    sampled = [resample_path(r, taus) for r in reports]
    return min(
        float(np.min(np.linalg.norm(sampled[i] - sampled[j], axis=1)))
        for i in range(len(reports)) for j in range(i + 1, len(reports))
    )


def match_points(a: np.ndarray, b: np.ndarray) -> tuple[bool, float]:
    """
    Minimum-cost matching of two point sets.

    :return: Whether the sets have equal size, and the largest matched distance.
    :rtype: tuple[bool, float]
    """
    if len(a) == 0 or len(b) == 0:
        return len(a) == len(b), 0.0
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    rows, cols = linear_sum_assignment(cost)
    return len(a) == len(b), float(cost[rows, cols].max())


def verify_invariance(sys: PolySystem, pert: PerturbationSpec, t: float, K: Box, cfg: Settings = config,
                      t_star: float | None = None) -> InvarianceReport:
    """
    Tracks every simple root of ``sys`` in ``K`` to ``tau = t`` and compares the
    endpoints with an independent solve of the deformed system.

    :param sys: The unperturbed system.
    :type sys: PolySystem
    :param pert: The perturbation.
    :type pert: PerturbationSpec
    :param t: The magnitude.
    :type t: float
    :param K: The box.
    :type K: Box
    :param cfg: Settings.
    :type cfg: Settings
    :param t_star: Certified bound; a warning is logged when ``t >= t_star``.
    :type t_star: float | None
    :return: Counts, tracks, matching and crash diagnostics.
    :rtype: InvarianceReport
    """
    if t_star is not None and t >= t_star:
        logger.warning("%s: t=%g, t*=%g", messages.T_ABOVE_BOUND, t, t_star)
    before = find_roots(sys, K, cfg)
    tracks = tuple(track_path(sys, pert, r.x, t, K, cfg) for r in before.simple)
    after = find_roots(deformed_system(sys, pert, t), K, cfg)
    ends = np.array([tr.end for tr in tracks if tr.completed]).reshape(-1, sys.n)
    same_size, worst = match_points(ends, after.points()[[not r.is_multiple for r in after.roots]])
    bijection = same_size and len(ends) == len(tracks) and worst <= cfg.DEDUP_RADIUS
    crashes = tuple(detect_crash(tracks, cfg=cfg))
    collided = {i for c in crashes if c.second is not None for i in (c.first, c.second)}
    tracks = tuple(
        replace(tr, status=TrackStatus.CRASH_SUSPECTED) if i in collided and tr.completed else tr
        for i, tr in enumerate(tracks)
    )
    report = InvarianceReport(
        t=t,
        t_star=t_star,
        before=before,
        after=after,
        tracks=tracks,
        bijection=bijection,
        max_match_distance=worst,
        min_separation=min_separation(tracks, cfg),
        crashes=crashes,
    )
    logger.info("invariance at t=%g: %d -> %d simple roots, bijection %s",
                t, report.count_before, report.count_after, bijection)
    return report
