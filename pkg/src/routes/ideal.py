from fastapi import APIRouter, Depends, Query

from src.conf.config import Settings, config
from src.repository.systems import SystemBundle
from src.routes.dependencies import bad_request, cert_settings, failed, get_bundle
from src.schemas.reports import CertificateResponse, LatticeResponse
from src.services.exceptions import DegreeMismatch, NotInIdeal
from src.services.ideal import certify_ideal_power, lattice_necessary_check, minimal_k

router = APIRouter(prefix="/ideal", tags=["ideal"])


@router.post("/certify", response_model=CertificateResponse)
def certify(
    k: int | None = Query(None, ge=1, le=config.K_CAP),
    bundle: SystemBundle = Depends(get_bundle),
    cfg: Settings = Depends(cert_settings),
):
    """
    Certifies that the gradient ideal of ``f_ell`` contains all monomials of degree ``k``.

    :param k: The power; the smallest certifiable one up to ``K_CAP`` when omitted.
    :type k: int | None
    :param bundle: The parsed system.
    :type bundle: SystemBundle
    :param cfg: Settings with the requested tolerance.
    :type cfg: Settings
    :raises HTTPException 422: If some monomial has no cofactor representation.
    :raises HTTPException 400: If ``k`` is below ``m_ell - 1``.
    :return: The minimum-norm certificate.
    :rtype: CertificateResponse
    """
    if k is None:
        k = minimal_k(bundle.system, cfg=cfg) or cfg.K_CAP
    try:
        return CertificateResponse.model_validate(certify_ideal_power(bundle.system, k, cfg=cfg))
    except NotInIdeal as err:
        raise failed(err)
    except DegreeMismatch as err:
        raise bad_request(err)


@router.post("/lattice", response_model=LatticeResponse)
def lattice(bundle: SystemBundle = Depends(get_bundle)):
    """
    Smith normal form index of the support difference lattice of ``f_ell``.
    """
    return LatticeResponse.model_validate(lattice_necessary_check(bundle.system.f_ell))
