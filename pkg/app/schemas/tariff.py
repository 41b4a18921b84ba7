import math
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator


def _check_finite(name: str, values: List[float]) -> None:
    for t, v in enumerate(values):
        if not math.isfinite(v):
            raise ValueError(f"{name}[{t}] must be finite, got {v}")


class PriceSchedule(BaseModel):
    """Day-ahead volumetric prices beta_t ($/kWh), the intercepts of the LRP curve."""
    model_config = ConfigDict(frozen=True)

    beta: List[float] = Field(min_length=1)
    period_hours: float = Field(default=1.0, gt=0, allow_inf_nan=False)

    @field_validator("beta")
    @classmethod
    def _positive_prices(cls, v: List[float]) -> List[float]:
        _check_finite("beta", v)
        for t, b in enumerate(v):
            if b <= 0:
                raise ValueError(f"beta[{t}] must be > 0, got {b}")
        return v

    @computed_field
    @property
    def n_periods(self) -> int:
        return len(self.beta)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)

    def in_energy_unit(self, factor: float) -> "PriceSchedule":
        """Re-express prices per (kWh * factor), e.g. factor=1000 for $/Wh."""
        return PriceSchedule(beta=[b / factor for b in self.beta], period_hours=self.period_hours)


class AlphaSchedule(BaseModel):
    """LRP slopes alpha_t ($/kWh^2)."""
    model_config = ConfigDict(frozen=True)

    alpha: List[float] = Field(min_length=1)

    @field_validator("alpha")
    @classmethod
    def _nonnegative(cls, v: List[float]) -> List[float]:
        _check_finite("alpha", v)
        for t, a in enumerate(v):
            if a < 0:
                raise ValueError(f"alpha[{t}] must be >= 0, got {a}")
        return v

    @computed_field
    @property
    def n_periods(self) -> int:
        return len(self.alpha)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)

    @classmethod
    def zeros(cls, n_periods: int) -> "AlphaSchedule":
        return cls(alpha=[0.0] * n_periods)

    def in_energy_unit(self, factor: float) -> "AlphaSchedule":
        return AlphaSchedule(alpha=[a / factor**2 for a in self.alpha])


class LrpSchedule(BaseModel):
    """Paired (alpha_t, beta_t): marginal price pi_t = alpha_t * x_t + beta_t."""
    model_config = ConfigDict(frozen=True)

    alpha: AlphaSchedule
    beta: PriceSchedule

    @model_validator(mode="after")
    def _same_length(self) -> "LrpSchedule":
        if self.alpha.n_periods != self.beta.n_periods:
            raise ValueError(
                f"alpha has {self.alpha.n_periods} periods but beta has {self.beta.n_periods}"
            )
        return self

    @classmethod
    def day_ahead(cls, beta: PriceSchedule) -> "LrpSchedule":
        return cls(alpha=AlphaSchedule.zeros(beta.n_periods), beta=beta)

    @property
    def n_periods(self) -> int:
        return self.beta.n_periods

    @property
    def period_hours(self) -> float:
        return self.beta.period_hours

    def in_energy_unit(self, factor: float) -> "LrpSchedule":
        return LrpSchedule(alpha=self.alpha.in_energy_unit(factor), beta=self.beta.in_energy_unit(factor))


class LoadProfile(BaseModel):
    """Energy per period (kWh); negative entries are injections."""
    model_config = ConfigDict(frozen=True)

    x: List[float] = Field(min_length=1)

    @field_validator("x")
    @classmethod
    def _finite(cls, v: List[float]) -> List[float]:
        _check_finite("x", v)
        return v

    @computed_field
    @property
    def n_periods(self) -> int:
        return len(self.x)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    @classmethod
    def zeros(cls, n_periods: int) -> "LoadProfile":
        return cls(x=[0.0] * n_periods)

    @classmethod
    def from_array(cls, values) -> "LoadProfile":
        return cls(x=[float(v) for v in np.asarray(values, dtype=float)])

    def in_energy_unit(self, factor: float) -> "LoadProfile":
        return LoadProfile(x=[v * factor for v in self.x])


class BillLineItem(BaseModel):
    period_index: int
    energy_kwh: float
    marginal_price_usd_per_kwh: float
    period_cost_usd: float


class Bill(BaseModel):
    items: List[BillLineItem]
    total_usd: float
