from fastapi import Body, Depends, HTTPException, Query, status

from src.conf.config import Settings, config, with_overrides
from src.repository.systems import SystemBundle, parse_system_document
from src.schemas.systems import SystemFileSchema
from src.services.exceptions import PolyShiftError, SystemFileError


def get_bundle(body: SystemFileSchema = Body(...)) -> SystemBundle:
    """
    Parses the request body into domain objects.

    :param body: The system document.
    :type body: SystemFileSchema
    :raises HTTPException 400: If a polynomial cannot be parsed or the system is inconsistent.
    :return: The parsed bundle.
    :rtype: SystemBundle
    """
    try:
        return parse_system_document(body)
    except SystemFileError as err:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=err.errors)


def solver_settings(
    seed: int | None = Query(None, ge=0),
    grid: int | None = Query(None, ge=1, le=64),
    tol: float | None = Query(None, gt=0, description="singularity threshold"),
    bundle: SystemBundle = Depends(get_bundle),
) -> Settings:
    """
    Solver settings; the seed comes from the query, then the file, then ``SEED``.
    """
    seed = bundle.seed if seed is None else seed
    return with_overrides(config, SEED=seed, GRID_PER_AXIS=grid, SINGULAR_TOL=tol)


def cert_settings(tol: float | None = Query(None, gt=0, description="certificate tolerance")) -> Settings:
    return with_overrides(config, CERT_TOL=tol)


def failed(err: PolyShiftError) -> HTTPException:
    """
    422 for certification and verification failures.
    """
    return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=err.detail)


def bad_request(err: PolyShiftError | ValueError) -> HTTPException:
    return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=getattr(err, "detail", str(err)))
