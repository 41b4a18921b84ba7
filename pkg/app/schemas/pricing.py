from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.schemas.customer import OptimizerResult
from app.schemas.enums import Metering
from app.schemas.tariff import LoadProfile


class TargetProfile(BaseModel):
    """DSO target load x_hat_t (kWh). On a shared meter x_hat includes base_load."""
    model_config = ConfigDict(frozen=True)

    x_hat: LoadProfile
    metering: Metering = Metering.SEPARATE
    controllable_is_bidirectional: bool = False
    base_load: Optional[LoadProfile] = None

    @model_validator(mode="after")
    def _has_positive_period(self) -> "TargetProfile":
        if not any(v > 0 for v in self.x_hat.x):
            raise ValueError("target needs at least one period with x_hat > 0")
        if self.base_load is not None and self.base_load.n_periods != self.x_hat.n_periods:
            raise ValueError("base_load and x_hat lengths differ")
        return self

    @property
    def shared_unidirectional(self) -> bool:
        return self.metering == Metering.SHARED and not self.controllable_is_bidirectional

    @property
    def base_values(self) -> np.ndarray:
        if self.base_load is None:
            return np.zeros(self.x_hat.n_periods)
        return self.base_load.values

    @property
    def controllable_values(self) -> np.ndarray:
        """Controllable part of the target: x_hat minus base load on a shared meter."""
        if self.metering == Metering.SHARED:
            return self.x_hat.values - self.base_values
        return self.x_hat.values


class OptimalAlphaConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha_seed: float = Field(default=settings.DEFAULT_ALPHA_SEED, ge=0, allow_inf_nan=False)
    theta: float = Field(default=settings.DEFAULT_THETA, gt=0, allow_inf_nan=False)
    reassign_seed_alpha: bool = False
    # Forecast margin applied to the controllable target before pricing
    target_overestimate: float = Field(default=0.0, ge=0, allow_inf_nan=False)


class RoundtripReport(BaseModel):
    deviations: List[float]
    max_deviation: float
    theta_bounds: List[Optional[float]]
    lambda_star: float
    seed_period: int
    result: OptimizerResult


class TauVector(BaseModel):
    """Evenly spaced slope multipliers on [tau_min, tau_max], both endpoints included."""
    model_config = ConfigDict(frozen=True)

    values: List[float] = Field(min_length=2)
    tau_min: float
    tau_max: float

    @model_validator(mode="after")
    def _evenly_spaced(self) -> "TauVector":
        if not 0 < self.tau_min < self.tau_max:
            raise ValueError(f"need 0 < tau_min < tau_max, got [{self.tau_min}, {self.tau_max}]")
        v = np.asarray(self.values)
        expected = np.linspace(self.tau_min, self.tau_max, v.size)
        if not np.allclose(v, expected, rtol=1e-12, atol=1e-12):
            raise ValueError("tau values are not evenly spaced on [tau_min, tau_max]")
        return self


class EtaClass(BaseModel):
    class_name: str
    max_load_kw: float = Field(gt=0)
    eta: float = Field(gt=0, allow_inf_nan=False)
