from typing import List, Optional

from pydantic import BaseModel, Field

from app.schemas.customer import CustomerSpec
from app.schemas.pricing import OptimalAlphaConfig, RoundtripReport, TargetProfile
from app.schemas.tariff import LoadProfile, LrpSchedule, PriceSchedule


class IrLrpRequest(BaseModel):
    beta: PriceSchedule
    tau_min: float = Field(default=0.1, gt=0)
    tau_max: float = Field(default=1.5, gt=0)
    eta: float = Field(gt=0)


class TariffResponse(BaseModel):
    """Per-period LRP coefficients; tau is set for inverse-rank tariffs."""
    alpha: List[float]
    beta: List[float]
    tau: Optional[List[float]] = None


class OptimalAlphaRequest(BaseModel):
    beta: PriceSchedule
    target: TargetProfile
    config: OptimalAlphaConfig = OptimalAlphaConfig()
    # When given, the customer is re-optimized under the new tariff
    spec: Optional[CustomerSpec] = None


class OptimalAlphaResponse(BaseModel):
    alpha: List[float]
    beta: List[float]
    seed_period: int
    lambda_star: float
    roundtrip: Optional[RoundtripReport] = None


class OptimizeRequest(BaseModel):
    schedule: LrpSchedule
    spec: CustomerSpec


class BillRequest(BaseModel):
    schedule: LrpSchedule
    profile: LoadProfile
