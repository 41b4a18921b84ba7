"""Centralized day-ahead charging of building EV fleets.

Individual EVs are aggregated into one controllable variable per building
(or per building type when profiles are shared). Without a feeder the
problem decouples by building and is filled greedily; with a feeder every
(node, phase, period) LinDistFlow voltage becomes an LP row.
"""
import logging
from collections import OrderedDict
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import InfeasibleError, LrpError
from app.schemas.customer import CustomerSpec
from app.schemas.enums import Metering
from app.schemas.feeder import PHASES, FeederModel, NodeLoad
from app.schemas.fleet import BuildingFleet, FleetSpec, ScheduleResult
from app.schemas.tariff import LoadProfile, PriceSchedule
from app.services.customer_optimizer import optimize_day_ahead
from app.services.feeder_ldf import RadialFeeder, build_injections, horizon_voltages, voltage_sensitivity
from app.services.lp import lp_solve

logger = logging.getLogger(__name__)

BINDING_TOL = 1e-7


def building_customer_spec(building: BuildingFleet, metering: Metering = Metering.SEPARATE) -> CustomerSpec:
    """The building's EV fleet as a consume-only customer behind the given meter."""
    return CustomerSpec(
        total_energy_kwh=building.energy_kwh,
        consume_bound_kw=building.charge_kw,
        local_limit_kw=building.local_limit_kw,
        base_load=LoadProfile(x=list(building.base_load)),
        metering=metering,
    )


def _check_horizon(prices: PriceSchedule, fleet: FleetSpec) -> None:
    if prices.n_periods != fleet.n_periods:
        raise LrpError(f"{prices.n_periods} prices for a {fleet.n_periods}-period fleet")
    if abs(prices.period_hours - fleet.period_hours) > 1e-12:
        raise LrpError(
            f"price period of {prices.period_hours} h does not match fleet period of {fleet.period_hours} h"
        )


def _capacity(building: BuildingFleet, period_hours: float) -> np.ndarray:
    base = np.asarray(building.base_load, dtype=float)
    hi = np.minimum(building.charge_kw, building.local_limit_kw - base / period_hours) * period_hours
    if (hi < 0).any():
        raise InfeasibleError(
            f"{building.name}: base load exceeds the local limit at periods {np.flatnonzero(hi < 0).tolist()}"
        )
    return hi


def _objective(prices: PriceSchedule, fleet: FleetSpec, profiles: Dict[str, np.ndarray]) -> float:
    beta = prices.values
    return float(sum(beta @ (profiles[b.name] + np.asarray(b.base_load)) for b in fleet.buildings))


def _groups(fleet: FleetSpec) -> "OrderedDict[str, List[BuildingFleet]]":
    """Buildings sharing one LP variable; zero-EV buildings are left out."""
    groups: "OrderedDict[str, List[BuildingFleet]]" = OrderedDict()
    for b in fleet.buildings:
        if b.ev_count == 0:
            continue
        key = b.building_type if fleet.share_profiles_by_type else b.name
        groups.setdefault(key, []).append(b)
    return groups


def schedule_unconstrained(prices: PriceSchedule, fleet: FleetSpec) -> ScheduleResult:
    _check_horizon(prices, fleet)
    if fleet.share_profiles_by_type:
        return _solve_lp(prices, fleet, rows=None)
    profiles = {}
    for b in fleet.buildings:
        if b.ev_count == 0:
            profiles[b.name] = np.zeros(fleet.n_periods)
            continue
        result = optimize_day_ahead(prices, building_customer_spec(b))
        profiles[b.name] = result.profile.values
    objective = _objective(prices, fleet, profiles)
    logger.info(f"Unconstrained fleet schedule for {len(profiles)} buildings, cost ${objective:.2f}")
    return ScheduleResult(profiles=profiles, objective=objective)


def _voltage_rows(
    feeder: RadialFeeder,
    fleet: FleetSpec,
    weights: Dict[str, float],
    members: List[Tuple[int, BuildingFleet]],
    n_vars_per_period: int,
    v_min: float,
):
    """A_ub rows and labels keeping v**2 >= v_min**2 at leaf and loaded nodes."""
    T, h = fleet.n_periods, fleet.period_hours
    loads = [
        NodeLoad(node=b.node, base_kwh=np.asarray(b.base_load, dtype=float), controllable_kwh=np.zeros(T))
        for b in fleet.buildings
    ]
    v2_base = horizon_voltages(feeder, build_injections(feeder, loads, h))
    v_base = np.sqrt(np.clip(v2_base, 0.0, None))
    lowest = np.nanmin(v_base)
    if lowest < v_min - settings.VIOLATION_TOL_PU:
        raise InfeasibleError(f"base-case voltage {lowest:.4f} pu is already below {v_min} pu")

    candidates = list(dict.fromkeys(feeder.leaves() + [b.node for b in fleet.buildings]))
    rows, rhs, labels = [], [], []
    for node in candidates:
        i = feeder.node_index(node)
        for p, phase in enumerate(PHASES):
            if not feeder.phase_mask[i, p]:
                continue
            # v_i**2 change per kWh of each member building's EV load on this phase
            sens = voltage_sensitivity(feeder, node, phase)
            coef = np.zeros(n_vars_per_period)
            for group, b in members:
                j = feeder.node_index(b.node)
                if not feeder.phase_mask[j, p]:
                    continue
                n_phases = int(feeder.phase_mask[j].sum())
                coef[group] += -sens[j] * weights[b.name] / (n_phases * h * feeder.model.base_kva)
            if not coef.any():
                continue
            for t in range(T):
                row = np.zeros(n_vars_per_period * T)
                row[t * n_vars_per_period:(t + 1) * n_vars_per_period] = coef
                rows.append(row)
                rhs.append(v2_base[t, i, p] - v_min ** 2)
                labels.append((node, phase, t))
    if not rows:
        return np.zeros((0, n_vars_per_period * T)), np.zeros(0), []
    A, b = np.array(rows), np.array(rhs)
    _, first = np.unique(np.column_stack([A, b]), axis=0, return_index=True)
    first = np.sort(first)
    logger.debug(f"{len(rows)} voltage rows, {first.size} after dropping duplicates")
    return A[first], b[first], [labels[k] for k in first]


def _solve_lp(
    prices: PriceSchedule,
    fleet: FleetSpec,
    rows: Optional[Tuple[RadialFeeder, float]],
) -> ScheduleResult:
    T, h = fleet.n_periods, fleet.period_hours
    groups = _groups(fleet)
    keys = list(groups)
    G = len(keys)
    profiles = {b.name: np.zeros(T) for b in fleet.buildings}
    if G == 0:
        return ScheduleResult(profiles=profiles, objective=_objective(prices, fleet, profiles))

    # Variable (t, g) at column t * G + g; building energy = weight * variable
    weights: Dict[str, float] = {}
    members: List[Tuple[int, BuildingFleet]] = []
    upper = np.zeros((T, G))
    energy = np.zeros(G)
    cost = np.zeros((T, G))
    for g, key in enumerate(keys):
        group = groups[key]
        shared = fleet.share_profiles_by_type
        if shared and len({b.ev_energy_kwh for b in group}) > 1:
            raise LrpError(f"buildings of type '{key}' need one per-EV energy to share a profile")
        caps = []
        for b in group:
            w = float(b.ev_count) if shared else 1.0
            weights[b.name] = w
            members.append((g, b))
            caps.append(_capacity(b, h) / w)
            cost[:, g] += w * prices.values
        upper[:, g] = np.min(caps, axis=0)
        energy[g] = group[0].ev_energy_kwh if shared else group[0].energy_kwh
        if energy[g] > upper[:, g].sum() + settings.ENERGY_TOL * max(1.0, energy[g]):
            raise InfeasibleError(f"'{key}' needs {energy[g]:.6g} kWh but can take {upper[:, g].sum():.6g}")

    A_eq = np.zeros((G, T * G))
    for g in range(G):
        A_eq[g, g::G] = 1.0
    A_ub, b_ub, labels = None, None, []
    if rows is not None:
        feeder, v_min = rows
        A_ub, b_ub, labels = _voltage_rows(feeder, fleet, weights, members, G, v_min)
        if not labels:
            A_ub, b_ub = None, None

    bounds = [(0.0, float(u)) for u in upper.ravel()]
    solution = lp_solve(cost.ravel(), A_ub, b_ub, A_eq, energy, bounds)
    x = solution.x.reshape(T, G)
    for g, b in members:
        profiles[b.name] = weights[b.name] * x[:, g]

    binding = []
    if labels:
        tight = solution.ineq_slack <= BINDING_TOL * (1.0 + np.abs(b_ub))
        binding = [labels[k] for k in np.flatnonzero(tight)]
    objective = _objective(prices, fleet, profiles)
    logger.info(
        f"Fleet LP solved in {solution.iterations} pivots: cost ${objective:.2f}, "
        f"{len(binding)} binding voltage rows"
    )
    return ScheduleResult(profiles=profiles, objective=objective, binding=binding, iterations=solution.iterations)


def schedule_voltage_constrained(
    prices: PriceSchedule,
    fleet: FleetSpec,
    feeder: FeederModel,
    v_min: Optional[float] = None,
) -> ScheduleResult:
    _check_horizon(prices, fleet)
    v_min = settings.V_MIN_PU if v_min is None else v_min
    radial = feeder if isinstance(feeder, RadialFeeder) else RadialFeeder(feeder)
    return _solve_lp(prices, fleet, rows=(radial, v_min))


def per_ev_profiles(result: ScheduleResult, fleet: FleetSpec) -> Dict[str, np.ndarray]:
    """Equal split of each building profile over its EVs, shape (ev_count, periods)."""
    split = {}
    for b in fleet.buildings:
        profile = result.profiles[b.name]
        if b.ev_count == 0:
            split[b.name] = np.zeros((0, profile.size))
        else:
            split[b.name] = np.tile(profile / b.ev_count, (b.ev_count, 1))
    return split
