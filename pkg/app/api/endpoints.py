from fastapi import APIRouter, UploadFile, File, HTTPException, Depends, Form
from fastapi.responses import PlainTextResponse
from pydantic import ValidationError
from app.core.errors import LrpError
from app.services.pricing_service import PricingService
from app.schemas.api import (
    IrLrpRequest, TariffResponse, OptimalAlphaRequest, OptimalAlphaResponse,
    OptimizeRequest, BillRequest
)
from app.schemas.customer import OptimizerResult
from app.schemas.tariff import Bill
import logging

logger = logging.getLogger(__name__)

router = APIRouter()

# Dependency injection for the service
def get_pricing_service():
    return PricingService()

def _http_error(e: Exception) -> HTTPException:
    if isinstance(e, (LrpError, ValidationError)):
        return HTTPException(status_code=400, detail=str(e))
    logger.exception("Unexpected error while handling request")
    return HTTPException(status_code=500, detail=str(e))

@router.post("/tariffs/ir-lrp", response_model=TariffResponse)
def build_ir_lrp_tariff(
    request: IrLrpRequest,
    service: PricingService = Depends(get_pricing_service)
):
    try:
        return service.ir_lrp(request)
    except Exception as e:
        raise _http_error(e)

@router.post("/tariffs/ir-lrp/csv")
async def build_ir_lrp_tariff_csv(
    file: UploadFile = File(...),
    tau_min: float = Form(0.1),
    tau_max: float = Form(1.5),
    eta: float = Form(...),
    save: bool = Form(False),
    service: PricingService = Depends(get_pricing_service)
):
    """
    Build an IR-LRP tariff from an uploaded `period,beta` CSV.

    Returns the tariff as `period,beta,alpha` CSV; with save=true a copy is
    stored under STORAGE_DIR and its path is returned in X-Saved-Path.
    """
    if not file.filename:
        raise HTTPException(status_code=400, detail="No filename provided")

    logger.info(f"Received IR-LRP CSV request for {file.filename} - tau [{tau_min}, {tau_max}], eta {eta}")

    try:
        content = await service.ir_lrp_csv(file, tau_min, tau_max, eta)
        headers = {}
        if save:
            headers["X-Saved-Path"] = service.save_tariff(content, file.filename)
        return PlainTextResponse(content=content, media_type="text/csv", headers=headers)
    except Exception as e:
        raise _http_error(e)

@router.post("/tariffs/optimal-alpha", response_model=OptimalAlphaResponse)
def build_optimal_alpha_tariff(
    request: OptimalAlphaRequest,
    service: PricingService = Depends(get_pricing_service)
):
    try:
        return service.optimal_alpha(request)
    except Exception as e:
        raise _http_error(e)

@router.post("/optimize", response_model=OptimizerResult)
def optimize_customer(
    request: OptimizeRequest,
    service: PricingService = Depends(get_pricing_service)
):
    """Cost-minimizing day-ahead schedule of one customer under an LRP tariff."""
    try:
        return service.optimize(request)
    except Exception as e:
        raise _http_error(e)

@router.post("/bill", response_model=Bill)
def bill_profile(
    request: BillRequest,
    service: PricingService = Depends(get_pricing_service)
):
    try:
        return service.bill(request)
    except Exception as e:
        raise _http_error(e)
