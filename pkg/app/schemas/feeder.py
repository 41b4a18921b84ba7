from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

PHASES = ("a", "b", "c")


class FeederNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    phases: List[str] = Field(default_factory=lambda: list(PHASES))

    @field_validator("phases")
    @classmethod
    def _known_phases(cls, v: List[str]) -> List[str]:
        unknown = set(v) - set(PHASES)
        if unknown or not v:
            raise ValueError(f"phases must be a non-empty subset of {PHASES}, got {v}")
        return v


class FeederLine(BaseModel):
    """Series impedance per phase in per-unit; phases are decoupled."""
    model_config = ConfigDict(frozen=True)

    from_node: str
    to_node: str
    r_pu: float = Field(ge=0, allow_inf_nan=False)
    x_pu: float = Field(ge=0, allow_inf_nan=False)


class FeederModel(BaseModel):
    """Radial feeder. base_kva is the per-phase power base used to per-unitize loads."""
    model_config = ConfigDict(frozen=True)

    nodes: List[FeederNode] = Field(min_length=1)
    lines: List[FeederLine]
    substation: str
    v_substation_pu: float = Field(default=1.0, gt=0)
    base_kva: float = Field(default=100.0, gt=0)


@dataclass(frozen=True)
class NodeLoad:
    """Building energy at a feeder node for every period (kWh)."""
    node: str
    base_kwh: np.ndarray
    controllable_kwh: np.ndarray


@dataclass(frozen=True)
class NodalInjection:
    """Per-period, per-node, per-phase demand (kW / kVAr), shape (periods, nodes, 3).

    Positive values are consumption. Controllable (EV) load runs at unity
    power factor, so q_ctrl_kvar stays zero.
    """
    node_ids: List[str]
    p_kw: np.ndarray
    q_kvar: np.ndarray
    p_ctrl_kw: np.ndarray
    q_ctrl_kvar: np.ndarray

    @property
    def n_periods(self) -> int:
        return self.p_kw.shape[0]


@dataclass
class VoltageReport:
    v_squared: np.ndarray
    v_pu: np.ndarray
    min_voltage: float
    violations: List[Tuple[str, str, int]] = field(default_factory=list)
    violation_days: int = 0
