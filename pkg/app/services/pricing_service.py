import datetime
import io
import logging
from pathlib import Path

from fastapi import UploadFile

from app.core.config import settings
from app.core.errors import LrpError
from app.schemas.api import (
    BillRequest,
    IrLrpRequest,
    OptimalAlphaRequest,
    OptimalAlphaResponse,
    OptimizeRequest,
    TariffResponse,
)
from app.schemas.customer import OptimizerResult
from app.schemas.tariff import Bill, LrpSchedule, PriceSchedule
from app.services import io as lrp_io
from app.services import ir_lrp, optimal_alpha, tariff
from app.services.customer_optimizer import optimize

logger = logging.getLogger(__name__)


class PricingService:
    """Request-level facade over the tariff, pricing and optimizer services."""

    def ir_lrp(self, request: IrLrpRequest) -> TariffResponse:
        alphas = ir_lrp.compute(request.beta, (request.tau_min, request.tau_max), request.eta)
        tau = ir_lrp.assign_inverse_rank(
            request.beta, ir_lrp.build_tau(request.beta.n_periods, request.tau_min, request.tau_max)
        )
        logger.info(f"IR-LRP tariff for {request.beta.n_periods} periods, eta={request.eta}")
        return TariffResponse(alpha=alphas.alpha, beta=request.beta.beta, tau=tau.tolist())

    async def ir_lrp_csv(self, file: UploadFile, tau_min: float, tau_max: float, eta: float) -> str:
        content = await file.read()
        if not content:
            raise LrpError("uploaded price file is empty")
        beta, _ = lrp_io.read_tariff_csv(io.BytesIO(content))
        prices = PriceSchedule(beta=beta.tolist())
        alphas = ir_lrp.compute(prices, (tau_min, tau_max), eta)
        return lrp_io.tariff_csv_text(LrpSchedule(alpha=alphas, beta=prices))

    def optimal_alpha(self, request: OptimalAlphaRequest) -> OptimalAlphaResponse:
        alphas = optimal_alpha.compute_alphas(request.beta, request.target, request.config)
        seed = optimal_alpha.select_seed(request.beta, optimal_alpha.padded_target(request.target, request.config))
        lam_star = optimal_alpha.seed_multiplier(request.beta, request.target, request.config)
        roundtrip = None
        if request.spec is not None:
            roundtrip = optimal_alpha.verify_roundtrip(
                request.beta, request.target, alphas, request.spec, request.config
            )
        return OptimalAlphaResponse(
            alpha=alphas.alpha,
            beta=request.beta.beta,
            seed_period=seed,
            lambda_star=lam_star,
            roundtrip=roundtrip,
        )

    def optimize(self, request: OptimizeRequest) -> OptimizerResult:
        return optimize(request.schedule, request.spec)

    def bill(self, request: BillRequest) -> Bill:
        return tariff.bill(request.schedule, request.profile)

    def save_tariff(self, content: str, original_filename: str) -> str:
        """Stores a tariff CSV under STORAGE_DIR and returns its absolute path."""
        timestamp = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        storage_path = Path(settings.STORAGE_DIR)
        storage_path.mkdir(parents=True, exist_ok=True)
        file_path = storage_path / f"{Path(original_filename).stem}_tariff_{timestamp}.csv"
        file_path.write_text(content, encoding="utf-8")
        logger.info(f"Saved tariff to: {file_path}")
        return str(file_path.absolute())
