import math
from typing import Any

from pydantic import BaseModel, ConfigDict, field_validator

from src.schemas.systems import BoxSchema, TermSchema


def poly_terms(p: Any) -> Any:
    """
    Term list of a MultiPoly; other values pass through unchanged.
    """
    if hasattr(p, "items") and hasattr(p, "n") and not isinstance(p, dict):
        return [{"coeff": c, "exp": list(e)} for e, c in p.items()]
    return p


def finite_or_none(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


class CertificateResponse(BaseModel):
    ell: int
    k: int
    mu: int
    monomials: list[list[int]]
    cofactors: list[list[list[TermSchema]]]
    residuals: list[float]
    residual: float
    tol: float

    model_config = ConfigDict(from_attributes=True)  # noqa

    @field_validator("cofactors", mode="before")
    @classmethod
    def expand_cofactors(cls, v):
        return [[poly_terms(h) for h in row] for row in v]


class LatticeResponse(BaseModel):
    difference_vectors: list[list[int]]
    index: int | None
    passed: bool

    model_config = ConfigDict(from_attributes=True)  # noqa


class BoundResponse(BaseModel):
    norm_phi: float
    C: float
    C_sampled: float
    mu: int
    k: int
    k_prime: int
    t_star: float
    box: BoxSchema
    ell: int
    certificate_residual: float

    model_config = ConfigDict(from_attributes=True)  # noqa


class RootResponse(BaseModel):
    x: list[float]
    residual: float
    jf_value: float
    singularity_ratio: float
    multiplicity_estimate: int
    cluster_members: int
    kind: str

    model_config = ConfigDict(from_attributes=True)  # noqa


class SolverDiagnosticsResponse(BaseModel):
    starts: int
    iterations: int
    accepted: int
    no_convergence: int
    merges: int
    deflations: int

    model_config = ConfigDict(from_attributes=True)  # noqa


class RootSetResponse(BaseModel):
    roots: list[RootResponse]
    box: BoxSchema
    diagnostics: SolverDiagnosticsResponse
    seed: int

    model_config = ConfigDict(from_attributes=True)  # noqa


class PathPointResponse(BaseModel):
    tau: float
    x: list[float]
    jf_value: float
    step: float
    residual: float

    model_config = ConfigDict(from_attributes=True)  # noqa


class TrackResponse(BaseModel):
    start: list[float]
    end: list[float]
    path: list[PathPointResponse]
    status: str
    tau_start: float
    tau_end: float
    min_abs_jf: float

    model_config = ConfigDict(from_attributes=True)  # noqa

    @field_validator("status", mode="before")
    @classmethod
    def status_value(cls, v):
        return getattr(v, "value", v)


class CrashSuspectResponse(BaseModel):
    first: int
    second: int | None
    tau: float
    distance: float
    reason: str

    model_config = ConfigDict(from_attributes=True)  # noqa


class InvarianceResponse(BaseModel):
    t: float
    t_star: float | None
    below_bound: bool | None
    count_before: int
    count_after: int
    counts_equal: bool
    bijection: bool
    max_match_distance: float
    min_separation: float | None
    before: RootSetResponse
    after: RootSetResponse
    tracks: list[TrackResponse]
    crashes: list[CrashSuspectResponse]

    model_config = ConfigDict(from_attributes=True)  # noqa

    @field_validator("min_separation", mode="before")
    @classmethod
    def finite_separation(cls, v):
        return finite_or_none(v)


class ProbeResponse(BaseModel):
    count: int
    counts: list[int]
    stable: bool

    model_config = ConfigDict(from_attributes=True)  # noqa


class DeformationResponse(BaseModel):
    H: list[list[TermSchema]]
    magnitude: float
    seed: int | None

    model_config = ConfigDict(from_attributes=True)  # noqa

    @field_validator("H", mode="before")
    @classmethod
    def expand_h(cls, v):
        return [poly_terms(h) for h in v]


class SplitResponse(BaseModel):
    before: RootSetResponse
    after: RootSetResponse
    deformation: DeformationResponse
    assignment: list[int | None]
    expected: int | None
    conservation: bool | None
    multiplicities_known: bool
    strays: list[int]
    probes: list[ProbeResponse]

    model_config = ConfigDict(from_attributes=True)  # noqa


class KovResponse(BaseModel):
    r: float
    samples: int
    eps_f: float
    eps_F: float
    eps: float
    boundary_distance: float | None
    roots_in_ball: int
    max_cond: float
    passed: bool

    model_config = ConfigDict(from_attributes=True)  # noqa


class ErrorReport(BaseModel):
    error: str
    detail: str
    exit_code: int
    errors: list[str] = []


class FullReport(BaseModel):
    seed: int
    lattice: LatticeResponse | None = None
    certificate: CertificateResponse | None = None
    bound: BoundResponse | None = None
    invariance: InvarianceResponse | None = None
    split: SplitResponse | None = None
    failures: list[str] = []
