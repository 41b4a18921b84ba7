from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.schemas.customer import CustomerSpec
from app.schemas.enums import TariffMode
from app.schemas.pricing import EtaClass, OptimalAlphaConfig


class CustomerEntry(BaseModel):
    """One decentralized customer. Give the spec inline or as a JSON file."""
    id: str
    customer_class: str
    node: Optional[str] = None
    spec: Optional[CustomerSpec] = None
    spec_file: Optional[str] = None
    # Controllable target (kWh per period of one day), used by optimal_alpha
    target_file: Optional[str] = None

    @model_validator(mode="after")
    def _one_spec(self) -> "CustomerEntry":
        if (self.spec is None) == (self.spec_file is None):
            raise ValueError(f"customer '{self.id}': give exactly one of spec or spec_file")
        return self


class IrLrpParams(BaseModel):
    tau_min: float = Field(default=0.1, gt=0)
    tau_max: float = Field(default=1.5, gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "IrLrpParams":
        if self.tau_min >= self.tau_max:
            raise ValueError("tau_min must be below tau_max")
        return self


class SyntheticPriceParams(BaseModel):
    """Seeded day-to-day variation of the price file's first day."""
    seed: int
    noise: float = Field(default=0.05, ge=0, allow_inf_nan=False)


class Scenario(BaseModel):
    """A multi-day tariff experiment. Relative paths resolve against base_dir."""
    model_config = ConfigDict(extra="forbid")

    name: str
    horizon_days: int = Field(default=1, ge=1)
    periods_per_day: int = Field(default=24, ge=1)
    period_hours: float = Field(default=1.0, gt=0)
    # One day of prices is repeated; a longer file must cover the horizon
    price_file: str
    # When set, every day is a synthetic variation of the file's first day
    synthetic_prices: Optional[SyntheticPriceParams] = None
    tariffs: List[TariffMode] = Field(min_length=1)
    customers: List[CustomerEntry] = Field(default_factory=list)
    fleet_file: Optional[str] = None
    feeder_file: Optional[str] = None
    eta_classes: List[EtaClass] = Field(default_factory=list)
    eta_file: Optional[str] = None
    ir_lrp: IrLrpParams = IrLrpParams()
    optimal_alpha: OptimalAlphaConfig = OptimalAlphaConfig()
    v_min: float = Field(default=settings.V_MIN_PU, gt=0)
    output_dir: Optional[str] = None
    base_dir: Optional[str] = None

    @model_validator(mode="after")
    def _mode_inputs(self) -> "Scenario":
        if not self.customers and self.fleet_file is None:
            raise ValueError("scenario needs customers or a fleet_file")
        ids = [c.id for c in self.customers]
        if len(set(ids)) != len(ids):
            raise ValueError("customer ids must be unique")
        if TariffMode.CENTRALIZED_LDF in self.tariffs:
            if self.fleet_file is None or self.feeder_file is None:
                raise ValueError("centralized_ldf needs both fleet_file and feeder_file")
            if self.customers:
                raise ValueError("centralized_ldf schedules fleet buildings only; drop the customers list")
        if TariffMode.IR_LRP in self.tariffs and not self.eta_classes and self.eta_file is None:
            raise ValueError("ir_lrp needs eta_classes or eta_file")
        if TariffMode.OPTIMAL_ALPHA in self.tariffs:
            missing = [c.id for c in self.customers if c.target_file is None]
            if missing:
                raise ValueError(f"optimal_alpha needs a target_file for customers {missing}")
        return self

    def resolve(self, value: str) -> Path:
        path = Path(value)
        if path.is_absolute() or self.base_dir is None:
            return path
        return Path(self.base_dir) / path


class ComparisonRow(BaseModel):
    tariff: TariffMode
    min_voltage_pu: Optional[float] = None
    violation_days: int = 0
    costs: Dict[str, float]
    social_cost: float
    # Percent of the day-ahead social cost; None without a day-ahead run
    pct_diff: Optional[float] = None
    # Per-class cost relative to the day-ahead cost of the same class
    pct_by_class: Dict[str, Optional[float]] = Field(default_factory=dict)
    # Largest alpha * x lift over beta, and largest drop of the received export price
    max_price_increase: Optional[float] = None
    max_received_drop: Optional[float] = None


class ComparisonReport(BaseModel):
    scenario: str
    rows: List[ComparisonRow]
    output_dir: Optional[str] = None

    def row(self, tariff: TariffMode) -> ComparisonRow:
        for r in self.rows:
            if r.tariff == tariff:
                return r
        raise KeyError(tariff)
