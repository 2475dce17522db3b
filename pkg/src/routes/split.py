from fastapi import APIRouter, Depends, Query

from src.conf.config import Settings
from src.repository.systems import SystemBundle
from src.routes.dependencies import bad_request, failed, get_bundle, solver_settings
from src.schemas.reports import KovResponse, SplitResponse
from src.services.exceptions import RankDeficient, SplitFailed
from src.services.splitter import check_kov_conditions, search_deformation, split_multiple_roots

router = APIRouter(prefix="/split", tags=["split"])


@router.post("/", response_model=SplitResponse)
def split(
    t: float | None = Query(None, gt=0),
    probe: bool = Query(False),
    bundle: SystemBundle = Depends(get_bundle),
    cfg: Settings = Depends(solver_settings),
):
    """
    Splits the multiple roots of ``f`` with the file's deformation ``H``.

    Without a deformation in the file a random linear one is searched.

    :param t: Deformation magnitude, overrides ``deformation.t``.
    :type t: float | None
    :param probe: Estimate multiplicities before splitting.
    :type probe: bool
    :raises HTTPException 422: If ``f`` has no multiple root or ``f + H`` keeps one.
    :return: Roots before and after with their assignment.
    :rtype: SplitResponse
    """
    K = bundle.resolve_box()
    try:
        if bundle.deformation is None:
            report = search_deformation(bundle.system, K, cfg=cfg, magnitude=t or 0.1)
        else:
            H = bundle.deformation if t is None else bundle.deformation.at(t)
            report = split_multiple_roots(bundle.system, H, K, cfg, refine=probe)
    except SplitFailed as err:
        raise failed(err)
    return SplitResponse.model_validate(report)


@router.post("/kov", response_model=KovResponse)
def kov(
    r: float | None = Query(None, gt=0),
    samples: int | None = Query(None, ge=1, le=100000),
    bundle: SystemBundle = Depends(get_bundle),
    cfg: Settings = Depends(solver_settings),
):
    """
    Sampled closeness check between ``f`` and the file's ``target`` system in the ball ``B_r``.

    :raises HTTPException 400: If there is no target or no radius.
    :raises HTTPException 422: If a sampled Jacobian is singular.
    :return: Both estimates, the boundary distance and the verdict.
    :rtype: KovResponse
    """
    if bundle.target is None:
        raise bad_request(ValueError("target: required"))
    r = r or bundle.ball_r
    if r is None:
        raise bad_request(ValueError("no radius: pass r or set ball.r"))
    try:
        report = check_kov_conditions(bundle.system, bundle.target, r, samples, cfg)
    except RankDeficient as err:
        raise failed(err)
    return KovResponse.model_validate(report)
