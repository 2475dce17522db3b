from fastapi import APIRouter, Depends, Query

from src.conf.config import Settings
from src.repository.systems import SystemBundle
from src.routes.dependencies import bad_request, get_bundle, solver_settings
from src.schemas.reports import InvarianceResponse, TrackResponse
from src.services.bound import assemble_bound
from src.services.exceptions import PolyShiftError, SystemFileError
from src.services.homotopy import track_path, verify_invariance
from src.services.rootfind import find_roots

router = APIRouter(prefix="/homotopy", tags=["homotopy"])


def _magnitude(t: float | None, bundle: SystemBundle) -> float:
    t = bundle.t if t is None else t
    if t is None:
        raise bad_request(ValueError("no magnitude: pass t or set perturbation.t"))
    return t


@router.post("/track", response_model=list[TrackResponse])
def track(
    t: float | None = Query(None, ge=0),
    bundle: SystemBundle = Depends(get_bundle),
    cfg: Settings = Depends(solver_settings),
):
    """
    Tracks every simple root of ``f`` in the box from ``tau = 0`` to ``tau = t``.

    :raises HTTPException 400: If there is no perturbation or no magnitude.
    :return: One path per simple root.
    :rtype: list[TrackResponse]
    """
    t = _magnitude(t, bundle)
    try:
        pert = bundle.require_perturbation()
    except SystemFileError as err:
        raise bad_request(err)
    K = bundle.resolve_box()
    roots = find_roots(bundle.system, K, cfg)
    return [TrackResponse.model_validate(track_path(bundle.system, pert, r.x, t, K, cfg)) for r in roots.simple]


@router.post("/invariance", response_model=InvarianceResponse)
def invariance(
    t: float | None = Query(None, ge=0),
    bundle: SystemBundle = Depends(get_bundle),
    cfg: Settings = Depends(solver_settings),
):
    """
    Compares the tracked endpoints with an independent solve at ``tau = t``.

    The certified ``t*`` is attached when the certificate exists.

    :raises HTTPException 400: If there is no perturbation or no magnitude.
    :return: Counts, paths, matching distance and crash suspects.
    :rtype: InvarianceResponse
    """
    t = _magnitude(t, bundle)
    try:
        pert = bundle.require_perturbation()
    except SystemFileError as err:
        raise bad_request(err)
    K = bundle.resolve_box()
    try:
        t_star = assemble_bound(bundle.system, pert, K, cfg=cfg)[0].t_star
    except PolyShiftError:
        t_star = None
    report = verify_invariance(bundle.system, pert, t, K, cfg, t_star=t_star)
    return InvarianceResponse.model_validate(report)
