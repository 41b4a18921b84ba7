from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.schemas.enums import Metering
from app.schemas.tariff import LoadProfile


class CustomerSpec(BaseModel):
    """A customer's controllable resource as seen by its day-ahead optimizer.

    total_energy_kwh is the net energy over the horizon, i.e. consumption
    minus export_energy_kwh. base_load is the non-controllable load; it caps
    the controllable load against local_limit_kw and, on a shared meter, is
    priced together with it.
    """
    model_config = ConfigDict(frozen=True)

    total_energy_kwh: float = Field(allow_inf_nan=False)
    consume_bound_kw: float = Field(ge=0, allow_inf_nan=False)
    inject_bound_kw: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    export_energy_kwh: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    local_limit_kw: float = Field(gt=0, allow_inf_nan=False)
    base_load: Optional[LoadProfile] = None
    metering: Metering = Metering.SEPARATE

    @property
    def bidirectional(self) -> bool:
        return self.inject_bound_kw > 0

    def in_energy_unit(self, factor: float) -> "CustomerSpec":
        return CustomerSpec(
            total_energy_kwh=self.total_energy_kwh * factor,
            consume_bound_kw=self.consume_bound_kw * factor,
            inject_bound_kw=self.inject_bound_kw * factor,
            export_energy_kwh=self.export_energy_kwh * factor,
            local_limit_kw=self.local_limit_kw * factor,
            base_load=self.base_load.in_energy_unit(factor) if self.base_load else None,
            metering=self.metering,
        )


class OptimizerResult(BaseModel):
    profile: LoadProfile
    lambda_star: float
    kkt_residual: float
    iterations: int
    cost_usd: float


class KktReport(BaseModel):
    lambda_hat: float
    max_stationarity_residual: float
    upper_bound_violation: float
    lower_bound_violation: float
    energy_residual: float
    interior_periods: List[int]
