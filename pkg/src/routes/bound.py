from fastapi import APIRouter, Depends, Query

from src.conf.config import Settings, config
from src.repository.systems import SystemBundle
from src.routes.dependencies import bad_request, cert_settings, failed, get_bundle
from src.schemas.reports import BoundResponse
from src.services.bound import assemble_bound
from src.services.exceptions import DegreeMismatch, InvalidPerturbation, NotInIdeal, SystemFileError

router = APIRouter(prefix="/bound", tags=["bound"])


@router.post("/", response_model=BoundResponse)
def bound(
    k: int | None = Query(None, ge=1, le=config.K_CAP),
    bundle: SystemBundle = Depends(get_bundle),
    cfg: Settings = Depends(cert_settings),
):
    """
    Computes the perturbation bound ``t*`` on the file's box.

    :param k: Ideal power, overrides ``perturbation.k``.
    :type k: int | None
    :param bundle: The parsed system with a perturbation.
    :type bundle: SystemBundle
    :param cfg: Settings with the requested tolerance.
    :type cfg: Settings
    :raises HTTPException 400: If the file has no perturbation or ``phi`` is outside its window.
    :raises HTTPException 422: If the ideal power cannot be certified.
    :return: The factors of the bound and ``t*``.
    :rtype: BoundResponse
    """
    try:
        report, _ = assemble_bound(bundle.system, bundle.require_perturbation(), bundle.resolve_box(), k=k, cfg=cfg)
    except NotInIdeal as err:
        raise failed(err)
    except (SystemFileError, InvalidPerturbation, DegreeMismatch) as err:
        raise bad_request(err)
    return BoundResponse.model_validate(report)
