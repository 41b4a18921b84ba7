"""LRP price and cost arithmetic shared by every other service.

Period cost is C_t = alpha_t * x_t**2 + beta_t * x_t, applied unchanged to
signed x_t (injections included).
"""
import logging
from typing import Sequence

import numpy as np

from app.core.errors import LrpError
from app.schemas.tariff import Bill, BillLineItem, LoadProfile, LrpSchedule

logger = logging.getLogger(__name__)


def _check_period(schedule: LrpSchedule, t: int) -> None:
    if not 0 <= t < schedule.n_periods:
        raise LrpError(f"period index {t} out of range [0, {schedule.n_periods})")


def _check_length(schedule: LrpSchedule, profile: LoadProfile) -> None:
    if profile.n_periods != schedule.n_periods:
        raise LrpError(
            f"profile has {profile.n_periods} periods, schedule has {schedule.n_periods}"
        )


def marginal_price(schedule: LrpSchedule, t: int, x_t: float) -> float:
    _check_period(schedule, t)
    return schedule.alpha.alpha[t] * x_t + schedule.beta.beta[t]


def period_cost(schedule: LrpSchedule, t: int, x_t: float) -> float:
    _check_period(schedule, t)
    return schedule.alpha.alpha[t] * x_t * x_t + schedule.beta.beta[t] * x_t


def marginal_prices(schedule: LrpSchedule, x: np.ndarray) -> np.ndarray:
    return schedule.alpha.values * x + schedule.beta.values


def period_costs(schedule: LrpSchedule, x: np.ndarray) -> np.ndarray:
    return schedule.alpha.values * x * x + schedule.beta.values * x


def total_cost(schedule: LrpSchedule, profile: LoadProfile) -> float:
    _check_length(schedule, profile)
    return float(period_costs(schedule, profile.values).sum())


def bill(schedule: LrpSchedule, profile: LoadProfile) -> Bill:
    _check_length(schedule, profile)
    x = profile.values
    prices = marginal_prices(schedule, x)
    costs = period_costs(schedule, x)
    items = [
        BillLineItem(
            period_index=t,
            energy_kwh=float(x[t]),
            marginal_price_usd_per_kwh=float(prices[t]),
            period_cost_usd=float(costs[t]),
        )
        for t in range(schedule.n_periods)
    ]
    total = float(costs.sum())
    logger.debug(f"Billed {schedule.n_periods} periods, total ${total:.4f}")
    return Bill(items=items, total_usd=total)


def aggregate_meter_readings(readings: Sequence[float], readings_per_period: int) -> LoadProfile:
    """Sum sub-period meter readings (e.g. 15-min kWh) into per-period x_t."""
    if readings_per_period < 1:
        raise LrpError("readings_per_period must be >= 1")
    values = np.asarray(readings, dtype=float)
    if values.size == 0 or values.size % readings_per_period:
        raise LrpError(
            f"{values.size} readings do not split into periods of {readings_per_period}"
        )
    return LoadProfile.from_array(values.reshape(-1, readings_per_period).sum(axis=1))
