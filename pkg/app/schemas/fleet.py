from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.enums import Metering


class BuildingFleet(BaseModel):
    """EV fleet behind one building meter at a feeder node."""
    model_config = ConfigDict(frozen=True)

    name: str
    node: str
    building_type: str
    ev_count: int = Field(ge=0)
    ev_rate_kw: float = Field(default=7.2, gt=0)
    ev_energy_kwh: float = Field(default=20.0, gt=0)
    local_limit_kw: float = Field(gt=0)
    base_load: List[float]

    @property
    def energy_kwh(self) -> float:
        return self.ev_count * self.ev_energy_kwh

    @property
    def charge_kw(self) -> float:
        return self.ev_count * self.ev_rate_kw


class FleetSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    period_hours: float = Field(default=1.0, gt=0)
    buildings: List[BuildingFleet] = Field(min_length=1)
    # All buildings of one type charge with the same per-EV profile
    share_profiles_by_type: bool = False
    # Shared: building base load and EV charging sit behind one LRP meter
    metering: Metering = Metering.SEPARATE

    @model_validator(mode="after")
    def _consistent(self) -> "FleetSpec":
        names = [b.name for b in self.buildings]
        if len(set(names)) != len(names):
            raise ValueError("building names must be unique")
        lengths = {len(b.base_load) for b in self.buildings}
        if len(lengths) != 1:
            raise ValueError("every building needs a base load of the same length")
        return self

    @property
    def n_periods(self) -> int:
        return len(self.buildings[0].base_load)


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    iterations: int
    duality_gap: float
    ineq_slack: np.ndarray


@dataclass
class ScheduleResult:
    """Controllable EV energy per building and period (kWh)."""
    profiles: Dict[str, np.ndarray]
    objective: float
    binding: List[Tuple[str, str, int]] = field(default_factory=list)
    iterations: int = 0
