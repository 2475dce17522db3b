"""
Command-line entry point: ``python -m src.cli <command> <system.json> [flags]``.

Exit status is 0 on success, 2 when a certification or verification fails and
1 for usage and input errors. Reports go to stdout (and ``--out``); logs go to stderr.
"""
import argparse
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from pydantic import BaseModel

from src.conf import messages
from src.conf.config import Settings, config, with_overrides
from src.repository.systems import SystemBundle, load_system_file, write_report
from src.schemas.reports import (
    BoundResponse,
    CertificateResponse,
    ErrorReport,
    FullReport,
    InvarianceResponse,
    KovResponse,
    LatticeResponse,
    RootSetResponse,
    SplitResponse,
)
from src.services.bound import assemble_bound
from src.services.exceptions import (
    NotInIdeal,
    PolyShiftError,
    RankDeficient,
    SplitFailed,
    SystemFileError,
    VerificationFailed,
)
from src.services.homotopy import deformed_system, verify_invariance
from src.services.ideal import certify_ideal_power, lattice_necessary_check, minimal_k
from src.services.poly import Box
from src.services.rootfind import find_roots
from src.services.splitter import check_kov_conditions, search_deformation, split_multiple_roots

logger = logging.getLogger(__name__)

COMMANDS = ("check-ideal", "bound", "solve", "track", "split", "check-kov", "report")
EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2
# commands whose --tol is the certificate tolerance; the rest use it as the singularity threshold
CERT_COMMANDS = {"check-ideal", "bound", "report"}


class UsageError(Exception):
    pass


class JobParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class JobConfig:
    command: str
    input: Path
    t: float | None = None
    box: tuple[float, ...] | None = None
    ball_r: float | None = None
    tol: float | None = None
    seed: int | None = None
    grid: int | None = None
    out: Path | None = None
    format: str = "json"
    ell: int | None = None
    k: int | None = None
    probe: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise UsageError(f"unknown format {self.format!r}")
        for name in ("tol", "ball_r"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.t is not None and self.t < 0:
            raise UsageError("--t must be non-negative")
        if self.grid is not None and self.grid < 1:
            raise UsageError("--grid must be at least 1")
        if self.box is not None and (len(self.box) < 2 or len(self.box) % 2):
            raise UsageError("--box takes lo,hi or lo1,hi1,...,lon,hin")

    def settings(self, base: Settings = config, file_seed: int | None = None) -> Settings:
        tol_field = "CERT_TOL" if self.command in CERT_COMMANDS else "SINGULAR_TOL"
        seed = self.seed if self.seed is not None else file_seed
        return with_overrides(base, SEED=seed, GRID_PER_AXIS=self.grid, **{tol_field: self.tol})

    def resolve_box(self, bundle: SystemBundle) -> Box:
        """
        ``--box``, then ``--ball-r``, then the file's box or ball, then ``[-2, 2]^n``.
        """
        n = bundle.n
        if self.box is not None:
            values = self.box * n if len(self.box) == 2 else self.box
            if len(values) != 2 * n:
                raise UsageError(f"--box needs 2 or {2 * n} numbers")
            return Box(values[0::2], values[1::2])
        if self.ball_r is not None:
            return Box.cube(n, self.ball_r)
        return bundle.resolve_box()


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from err


def build_parser() -> JobParser:
    parser = JobParser(prog="polyshift", description="Perturbation bounds and root tracking for polynomial systems.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("input", type=Path, help="JSON system file")
    parser.add_argument("--t", type=float, help="perturbation or deformation magnitude")
    parser.add_argument("--box", type=_floats, help="lo,hi or lo1,hi1,...; use --box=-2,2 for negative bounds")
    parser.add_argument("--ball-r", dest="ball_r", type=float, help="radius of the ball (cube for solving)")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--grid", type=int, help="multistart grid points per axis")
    parser.add_argument("--out", type=Path)
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--ell", type=int, help="distinguished equation, overrides the file")
    parser.add_argument("--k", type=int, help="ideal power to certify")
    parser.add_argument("--probe", action="store_true", help="probe multiplicities before splitting")
    return parser


def parse_args(argv: Sequence[str] | None = None) -> JobConfig:
    ns = build_parser().parse_args(argv)
    return JobConfig(**vars(ns))


def _load(job: JobConfig) -> SystemBundle:
    bundle = load_system_file(job.input)
    if job.ell is not None:
        if not 1 <= job.ell <= bundle.n:
            raise UsageError(messages.ELL_OUT_OF_RANGE)
        # --ell counts equations in file order
        sorted_ell = bundle.order.index(job.ell - 1) + 1
        bundle = replace(bundle, system=replace(bundle.system, ell=sorted_ell))
    return bundle


def _certificate(bundle: SystemBundle, k: int | None, cfg: Settings):
    if k is None:
        k = minimal_k(bundle.system, cfg=cfg)
    return certify_ideal_power(bundle.system, cfg.K_CAP if k is None else k, cfg=cfg)


def _bound(bundle: SystemBundle, job: JobConfig, K: Box, cfg: Settings):
    report, cert = assemble_bound(bundle.system, bundle.require_perturbation(), K, k=job.k, cfg=cfg)
    logger.info("||phi|| = %g, C(a) = %g (sampled %g), mu = %d, k = %d, k' = %d",
                report.norm_phi, report.C, report.C_sampled, report.mu, report.k, report.k_prime)
    return report, cert


def _magnitude(job: JobConfig, bundle: SystemBundle) -> float:
    t = job.t if job.t is not None else bundle.t
    if t is None:
        raise UsageError("no magnitude: pass --t or set perturbation.t")
    return t


def cmd_check_ideal(job: JobConfig, bundle: SystemBundle, cfg: Settings) -> tuple[BaseModel, list[dict]]:
    lattice = lattice_necessary_check(bundle.system.f_ell)
    if not lattice.passed:
        logger.warning("lattice index is %s; numeric certification decides membership", lattice.index)
    cert = _certificate(bundle, job.k, cfg)
    payload = FullReport(
        seed=cfg.SEED,
        lattice=LatticeResponse.model_validate(lattice),
        certificate=CertificateResponse.model_validate(cert),
    )
    return payload, []


def cmd_bound(job: JobConfig, bundle: SystemBundle, cfg: Settings) -> tuple[BaseModel, list[dict]]:
    report, _ = _bound(bundle, job, job.resolve_box(bundle), cfg)
    return BoundResponse.model_validate(report), []


def cmd_solve(job: JobConfig, bundle: SystemBundle, cfg: Settings) -> tuple[BaseModel, list[dict]]:
    system = bundle.system
    t = job.t if job.t is not None else 0.0
    if t > 0:
        system = deformed_system(system, bundle.require_perturbation(), t)
    roots = find_roots(system, job.resolve_box(bundle), cfg)
    return RootSetResponse.model_validate(roots), roots.to_rows(bundle.variables)


def cmd_track(job: JobConfig, bundle: SystemBundle, cfg: Settings) -> tuple[BaseModel, list[dict]]:
    K = job.resolve_box(bundle)
    t = _magnitude(job, bundle)
    try:
        t_star = _bound(bundle, job, K, cfg)[0].t_star
    except NotInIdeal as err:
        logger.warning("no certified bound: %s", err.detail)
        t_star = None
    report = verify_invariance(bundle.system, bundle.require_perturbation(), t, K, cfg, t_star=t_star)
    rows = [
        {"track": i, "status": tr.status.value, **row}
        for i, tr in enumerate(report.tracks)
        for row in tr.to_rows(bundle.variables)
    ]
    payload = InvarianceResponse.model_validate(report)
    if not (report.counts_equal and report.bijection) or report.crashes:
        raise VerificationFailed(
            f"root count {report.count_before} -> {report.count_after}, bijection {report.bijection}, "
            f"{len(report.crashes)} crash suspects",
            payload=payload,
        )
    return payload, rows


def cmd_split(job: JobConfig, bundle: SystemBundle, cfg: Settings) -> tuple[BaseModel, list[dict]]:
    K = job.resolve_box(bundle)
    if bundle.deformation is None:
        logger.info("no deformation in file, searching the default support")
        report = search_deformation(bundle.system, K, cfg=cfg, magnitude=job.t if job.t is not None else 0.1)
    else:
        H = bundle.deformation if job.t is None else bundle.deformation.at(job.t)
        report = split_multiple_roots(bundle.system, H, K, cfg, refine=job.probe)
    rows = report.after.to_rows(bundle.variables)
    for row, owner in zip(rows, report.assignment):
        row["from"] = owner
    payload = SplitResponse.model_validate(report)
    if report.conservation is False:
        raise VerificationFailed(
            f"expected {report.expected} simple roots, found {len(report.after.simple)}", payload=payload
        )
    return payload, rows


def cmd_check_kov(job: JobConfig, bundle: SystemBundle, cfg: Settings) -> tuple[BaseModel, list[dict]]:
    if bundle.target is None:
        raise SystemFileError(["target: required for check-kov"])
    r = job.ball_r or bundle.ball_r
    if r is None:
        raise UsageError("no radius: pass --ball-r or set ball.r")
    report = check_kov_conditions(bundle.system, bundle.target, r, cfg=cfg)
    payload = KovResponse.model_validate(report)
    if not report.passed:
        raise VerificationFailed(f"eps={report.eps:.3e} exceeds boundary distance {report.boundary_distance}",
                                 payload=payload)
    return payload, []


def cmd_report(job: JobConfig, bundle: SystemBundle, cfg: Settings) -> tuple[BaseModel, list[dict]]:
    """
    Lattice check, certificate, bound, invariance at ``t`` and split when a deformation is present.
    """
    K = job.resolve_box(bundle)
    report = FullReport(seed=cfg.SEED)
    report.lattice = LatticeResponse.model_validate(lattice_necessary_check(bundle.system.f_ell))
    t_star = None
    try:
        if bundle.perturbation is not None:
            bound, cert = _bound(bundle, job, K, cfg)
            report.bound = BoundResponse.model_validate(bound)
            t_star = bound.t_star
        else:
            cert = _certificate(bundle, job.k, cfg)
        report.certificate = CertificateResponse.model_validate(cert)
    except NotInIdeal as err:
        report.failures.append(f"certificate: {err.detail}")
    t = job.t if job.t is not None else bundle.t
    if bundle.perturbation is not None and t is not None:
        inv = verify_invariance(bundle.system, bundle.perturbation, t, K, cfg, t_star=t_star)
        report.invariance = InvarianceResponse.model_validate(inv)
        if not (inv.counts_equal and inv.bijection):
            report.failures.append(f"invariance: {inv.count_before} -> {inv.count_after} simple roots")
    if bundle.deformation is not None:
        try:
            split = split_multiple_roots(bundle.system, bundle.deformation, K, cfg, refine=job.probe)
            report.split = SplitResponse.model_validate(split)
            if split.conservation is False:
                report.failures.append(f"split: expected {split.expected}, found {len(split.after.simple)}")
        except SplitFailed as err:
            report.failures.append(f"split: {err.detail}")
    if report.failures:
        raise VerificationFailed("; ".join(report.failures), payload=report)
    return report, []


HANDLERS = {
    "check-ideal": cmd_check_ideal,
    "bound": cmd_bound,
    "solve": cmd_solve,
    "track": cmd_track,
    "split": cmd_split,
    "check-kov": cmd_check_kov,
    "report": cmd_report,
}


def _error(err: Exception, code: int, out: Path | None) -> int:
    errors = list(getattr(err, "errors", []))
    detail = getattr(err, "detail", None) or str(err)
    payload = getattr(err, "payload", None)
    if payload is None:
        payload = ErrorReport(error=type(err).__name__, detail=detail, exit_code=code, errors=errors)
    logger.error("%s: %s", type(err).__name__, detail)
    print(write_report(payload, out))
    return code


def run(job: JobConfig) -> int:
    """
    Executes one job and writes its report.

    :param job: The parsed command line.
    :type job: JobConfig
    :return: The exit status.
    :rtype: int
    """
    try:
        bundle = _load(job)
        cfg = job.settings(file_seed=bundle.seed)
        payload, rows = HANDLERS[job.command](job, bundle, cfg)
    except (NotInIdeal, SplitFailed, RankDeficient, VerificationFailed) as err:
        return _error(err, EXIT_FAILED, job.out)
    except (UsageError, OSError, ValueError, PolyShiftError) as err:
        return _error(err, EXIT_USAGE, job.out)
    print(write_report(payload, job.out, job.format, rows), end="" if job.format == "csv" else "\n")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=config.LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        job = parse_args(argv)
    except UsageError as err:
        return _error(err, EXIT_USAGE, None)
    return run(job)


if __name__ == "__main__":
    sys.exit(main())
