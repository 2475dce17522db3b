from fastapi import APIRouter, Depends, Query

from src.conf.config import Settings
from src.repository.systems import SystemBundle
from src.routes.dependencies import bad_request, get_bundle, solver_settings
from src.schemas.reports import RootSetResponse
from src.services.exceptions import SystemFileError
from src.services.homotopy import deformed_system
from src.services.rootfind import find_roots

router = APIRouter(prefix="/roots", tags=["roots"])


@router.post("/solve", response_model=RootSetResponse)
def solve(
    t: float = Query(0.0, ge=0),
    bundle: SystemBundle = Depends(get_bundle),
    cfg: Settings = Depends(solver_settings),
):
    """
    Finds all real roots in the box of ``f + t F (phi, 0, ..., 0)^T``.

    :param t: Perturbation magnitude; ``0`` solves the unperturbed system.
    :type t: float
    :param bundle: The parsed system.
    :type bundle: SystemBundle
    :param cfg: Solver settings.
    :type cfg: Settings
    :raises HTTPException 400: If ``t > 0`` and the file has no perturbation.
    :return: Roots with residuals and Jacobian values.
    :rtype: RootSetResponse
    """
    system = bundle.system
    if t > 0:
        try:
            system = deformed_system(system, bundle.require_perturbation(), t)
        except SystemFileError as err:
            raise bad_request(err)
    return RootSetResponse.model_validate(find_roots(system, bundle.resolve_box(), cfg))
