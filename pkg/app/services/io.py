"""CSV and JSON readers/writers for tariffs, targets, schedules and scenarios."""
import io
import json
import logging
from pathlib import Path
from typing import IO, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import TypeAdapter, ValidationError

from app.core.errors import LrpError, ScenarioError
from app.schemas.customer import CustomerSpec
from app.schemas.feeder import FeederModel
from app.schemas.fleet import FleetSpec, ScheduleResult
from app.schemas.pricing import EtaClass
from app.schemas.scenario import Scenario
from app.schemas.tariff import LoadProfile, LrpSchedule
from app.services.tariff import marginal_prices

logger = logging.getLogger(__name__)

Source = Union[str, Path, IO]


def _read_columns(source: Source, required: List[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(source)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise LrpError(f"cannot read CSV {source}: {e}") from e
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise LrpError(f"CSV {source} lacks columns {missing}")
    frame = frame.sort_values("period").reset_index(drop=True)
    if not np.array_equal(frame["period"].to_numpy(), np.arange(len(frame))):
        raise LrpError(f"CSV {source}: periods must run 0..{len(frame) - 1} without gaps")
    return frame


def read_tariff_csv(source: Source) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """beta and, when the file carries it, alpha per period."""
    frame = _read_columns(source, ["period", "beta"])
    alpha = frame["alpha"].to_numpy(dtype=float) if "alpha" in frame.columns else None
    return frame["beta"].to_numpy(dtype=float), alpha


def tariff_frame(schedule: LrpSchedule, period_offset: int = 0) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "period": np.arange(schedule.n_periods) + period_offset,
            "beta": schedule.beta.values,
            "alpha": schedule.alpha.values,
        }
    )


def write_tariff_csv(schedules: Sequence[LrpSchedule], path: Union[str, Path]) -> Path:
    """One row per period; consecutive schedules are consecutive days."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames, offset = [], 0
    for schedule in schedules:
        frames.append(tariff_frame(schedule, offset))
        offset += schedule.n_periods
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)
    return path


def tariff_csv_text(schedule: LrpSchedule) -> str:
    buffer = io.StringIO()
    tariff_frame(schedule).to_csv(buffer, index=False)
    return buffer.getvalue()


def read_target_csv(source: Source) -> np.ndarray:
    return _read_columns(source, ["period", "x_hat_kwh"])["x_hat_kwh"].to_numpy(dtype=float)


def write_result_csv(schedule: LrpSchedule, profile: LoadProfile, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = profile.values
    pd.DataFrame(
        {"period": np.arange(x.size), "x_kwh": x, "marginal_price": marginal_prices(schedule, x)}
    ).to_csv(path, index=False)
    return path


def schedule_frame(result: ScheduleResult, fleet: FleetSpec, period_offset: int = 0) -> pd.DataFrame:
    records = [
        {"period": t + period_offset, "node": b.node, "building": b.name, "x_tilde_kwh": float(v)}
        for b in fleet.buildings
        for t, v in enumerate(result.profiles[b.name])
    ]
    return pd.DataFrame.from_records(records, columns=["period", "node", "building", "x_tilde_kwh"])


def _load_model(path: Union[str, Path], model, label: str):
    path = Path(path)
    try:
        return TypeAdapter(model).validate_json(path.read_bytes())
    except FileNotFoundError:
        raise ScenarioError(f"{label} file not found: {path}") from None
    except ValidationError as e:
        raise ScenarioError(f"invalid {label} file {path}: {e}") from e


def load_customer_spec(path: Union[str, Path]) -> CustomerSpec:
    return _load_model(path, CustomerSpec, "customer")


def load_feeder(path: Union[str, Path]) -> FeederModel:
    return _load_model(path, FeederModel, "feeder")


def load_fleet(path: Union[str, Path]) -> FleetSpec:
    return _load_model(path, FleetSpec, "fleet")


def load_eta_classes(path: Union[str, Path]) -> List[EtaClass]:
    return _load_model(path, List[EtaClass], "eta")


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario {path} is not valid JSON: {e}") from e
    raw.setdefault("base_dir", str(path.parent))
    try:
        scenario = Scenario.model_validate(raw)
    except ValidationError as e:
        raise ScenarioError(f"invalid scenario {path}: {e}") from e
    logger.info(f"Loaded scenario '{scenario.name}' from {path}")
    return scenario
