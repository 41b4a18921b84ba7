"""Scenario runner: builds each day's tariffs, lets every customer respond,
evaluates feeder voltages and bills the result.

Days are independent. Reports are reduced in (day, customer id) order so two
runs of one scenario write identical CSVs.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import LrpError, ScenarioError
from app.schemas.customer import CustomerSpec
from app.schemas.enums import Metering, TariffMode
from app.schemas.feeder import PHASES, NodeLoad
from app.schemas.fleet import FleetSpec, ScheduleResult
from app.schemas.pricing import EtaClass, TargetProfile
from app.schemas.scenario import ComparisonReport, ComparisonRow, Scenario
from app.schemas.tariff import LoadProfile, LrpSchedule, PriceSchedule
from app.services import io as lrp_io
from app.services.customer_optimizer import optimize, optimize_day_ahead
from app.services.feeder_ldf import RadialFeeder, build_injections, check_violations, horizon_voltages
from app.services.fleet_scheduler import (
    building_customer_spec,
    schedule_unconstrained,
    schedule_voltage_constrained,
)
from app.services.ir_lrp import alphas_for_class
from app.services.optimal_alpha import compute_alphas
from app.services.tariff import marginal_prices, period_costs

logger = logging.getLogger(__name__)


@dataclass
class Participant:
    id: str
    customer_class: str
    node: Optional[str]
    spec: CustomerSpec
    target: Optional[np.ndarray] = None
    from_fleet: bool = False

    @property
    def base(self) -> Optional[np.ndarray]:
        return self.spec.base_load.values if self.spec.base_load else None


@dataclass
class DeviationMetrics:
    per_period: np.ndarray
    linf: float
    l1: float


@dataclass
class DayOutcome:
    day: int
    schedules: Dict[TariffMode, Dict[str, LrpSchedule]] = field(default_factory=dict)
    profiles: Dict[TariffMode, Dict[str, np.ndarray]] = field(default_factory=dict)
    deviations: Dict[str, DeviationMetrics] = field(default_factory=dict)
    fleet_schedule: Optional[ScheduleResult] = None


@dataclass
class PreparedScenario:
    scenario: Scenario
    prices: np.ndarray
    participants: List[Participant]
    fleet: Optional[FleetSpec]
    feeder: Optional[RadialFeeder]
    eta_classes: List[EtaClass]
    price_source: str = "file"

    def day_prices(self, day: int) -> PriceSchedule:
        n = self.scenario.periods_per_day
        return PriceSchedule(
            beta=self.prices[day * n:(day + 1) * n].tolist(), period_hours=self.scenario.period_hours
        )


def social_cost(profiles: Mapping[str, np.ndarray], beta) -> float:
    """Sum of beta_t * x_t over every customer, whatever tariff they were billed under."""
    beta = np.asarray(beta, dtype=float)
    total = 0.0
    for name, x in profiles.items():
        x = np.asarray(x, dtype=float)
        if x.shape != beta.shape:
            raise LrpError(f"profile '{name}' has {x.size} periods, beta has {beta.size}")
        total += float(beta @ x)
    return total


def deviation_metrics(actual, target) -> DeviationMetrics:
    actual = np.asarray(actual, dtype=float)
    target = np.asarray(target, dtype=float)
    if actual.shape != target.shape:
        raise LrpError(f"actual has {actual.size} periods, target has {target.size}")
    diff = np.abs(actual - target)
    return DeviationMetrics(per_period=diff, linf=float(diff.max(initial=0.0)), l1=float(diff.sum()))


def price_increase_metrics(schedule: LrpSchedule, profile: LoadProfile) -> Dict[str, float]:
    """How far the LRP moves the price away from beta for a realized profile.

    max_price_increase: largest alpha_t * x_t over consuming periods ($/kWh).
    max_received_drop: largest drop of the price received on injecting periods.
    """
    if profile.n_periods != schedule.n_periods:
        raise LrpError(f"profile has {profile.n_periods} periods, schedule has {schedule.n_periods}")
    x = profile.values
    lift = marginal_prices(schedule, x) - schedule.beta.values
    consuming, injecting = x > 0, x < 0
    return {
        "max_price_increase": float(lift[consuming].max()) if consuming.any() else 0.0,
        "max_received_drop": float(-lift[injecting].min()) if injecting.any() else 0.0,
    }


def synthetic_prices(base: PriceSchedule, days: int, seed: int, noise: float = 0.05) -> np.ndarray:
    """Synthetic multi-day beta series: each day is base scaled by lognormal day and hour noise."""
    if days < 1:
        raise LrpError("days must be >= 1")
    rng = np.random.default_rng(seed)
    day_scale = rng.lognormal(0.0, noise, size=(days, 1))
    hour_scale = rng.lognormal(0.0, noise / 2, size=(days, base.n_periods))
    return (base.values[None, :] * day_scale * hour_scale).ravel()


def _require_file(scenario: Scenario, value: str, label: str) -> Path:
    path = scenario.resolve(value)
    if not path.is_file():
        raise ScenarioError(f"{label} file not found: {path}")
    return path


def _price_series(scenario: Scenario) -> Tuple[np.ndarray, str]:
    """Horizon beta series and its source label, "file" or "synthetic"."""
    beta, _ = lrp_io.read_tariff_csv(_require_file(scenario, scenario.price_file, "price"))
    n, days = scenario.periods_per_day, scenario.horizon_days
    params = scenario.synthetic_prices
    if params is not None:
        if beta.size < n:
            raise ScenarioError(f"price file has {beta.size} periods; synthetic prices need one day of {n}")
        base = PriceSchedule(beta=beta[:n].tolist(), period_hours=scenario.period_hours)
        logger.info(f"Scenario '{scenario.name}': synthetic prices, seed {params.seed}, noise {params.noise}")
        return synthetic_prices(base, days, params.seed, params.noise), "synthetic"
    if beta.size == n:
        return np.tile(beta, days), "file"
    if beta.size >= n * days:
        return beta[:n * days], "file"
    raise ScenarioError(f"price file has {beta.size} periods; need {n} or at least {n * days}")


def prepare(scenario: Scenario) -> PreparedScenario:
    n = scenario.periods_per_day
    prices, price_source = _price_series(scenario)
    participants: List[Participant] = []
    for entry in scenario.customers:
        spec = entry.spec or lrp_io.load_customer_spec(_require_file(scenario, entry.spec_file, "customer"))
        if spec.base_load is not None and spec.base_load.n_periods != n:
            raise ScenarioError(f"customer '{entry.id}': base load is not {n} periods long")
        target = None
        if entry.target_file:
            target = lrp_io.read_target_csv(_require_file(scenario, entry.target_file, "target"))
            if target.size != n:
                raise ScenarioError(f"customer '{entry.id}': target has {target.size} periods, expected {n}")
        participants.append(Participant(entry.id, entry.customer_class, entry.node, spec, target))

    fleet = None
    if scenario.fleet_file:
        fleet = lrp_io.load_fleet(_require_file(scenario, scenario.fleet_file, "fleet"))
        if fleet.n_periods != n or abs(fleet.period_hours - scenario.period_hours) > 1e-12:
            raise ScenarioError("fleet periods do not match the scenario's day")
        for b in fleet.buildings:
            spec = building_customer_spec(b, fleet.metering)
            participants.append(Participant(b.name, b.building_type, b.node, spec, from_fleet=True))
    ids = [p.id for p in participants]
    if len(set(ids)) != len(ids):
        raise ScenarioError("customer ids and fleet building names must be unique")
    participants.sort(key=lambda p: p.id)

    feeder = None
    if scenario.feeder_file:
        feeder = RadialFeeder(lrp_io.load_feeder(_require_file(scenario, scenario.feeder_file, "feeder")))
        for p in participants:
            if p.node is not None:
                feeder.node_index(p.node)

    eta = list(scenario.eta_classes)
    if scenario.eta_file:
        eta += lrp_io.load_eta_classes(_require_file(scenario, scenario.eta_file, "eta"))
    return PreparedScenario(scenario, prices, participants, fleet, feeder, eta, price_source)


def _centralized(prepared: PreparedScenario, beta: PriceSchedule) -> ScheduleResult:
    if prepared.feeder is not None:
        return schedule_voltage_constrained(beta, prepared.fleet, prepared.feeder, v_min=prepared.scenario.v_min)
    return schedule_unconstrained(beta, prepared.fleet)


def _target_profile(p: Participant, controllable: np.ndarray) -> TargetProfile:
    shared = p.spec.metering == Metering.SHARED
    base = p.base if p.base is not None else np.zeros(controllable.size)
    x_hat = controllable + base if shared else controllable
    return TargetProfile(
        x_hat=LoadProfile.from_array(x_hat),
        metering=p.spec.metering,
        controllable_is_bidirectional=p.spec.bidirectional,
        base_load=p.spec.base_load,
    )


def run_day(prepared: PreparedScenario, day: int) -> DayOutcome:
    scenario = prepared.scenario
    beta = prepared.day_prices(day)
    outcome = DayOutcome(day=day)
    needs_fleet = prepared.fleet is not None and (
        TariffMode.CENTRALIZED_LDF in scenario.tariffs or TariffMode.OPTIMAL_ALPHA in scenario.tariffs
    )
    if needs_fleet:
        try:
            outcome.fleet_schedule = _centralized(prepared, beta)
        except LrpError as e:
            raise ScenarioError(f"day {day}, fleet schedule: {e}") from e

    tau_range = (scenario.ir_lrp.tau_min, scenario.ir_lrp.tau_max)
    for mode in scenario.tariffs:
        schedules: Dict[str, LrpSchedule] = {}
        profiles: Dict[str, np.ndarray] = {}
        for p in prepared.participants:
            try:
                if mode == TariffMode.DAY_AHEAD:
                    schedule = LrpSchedule.day_ahead(beta)
                    x = optimize_day_ahead(beta, p.spec).profile.values
                elif mode == TariffMode.IR_LRP:
                    alphas = alphas_for_class(beta, tau_range, prepared.eta_classes, p.customer_class)
                    schedule = LrpSchedule(alpha=alphas, beta=beta)
                    x = optimize(schedule, p.spec).profile.values
                elif mode == TariffMode.OPTIMAL_ALPHA:
                    wanted = outcome.fleet_schedule.profiles[p.id] if p.from_fleet else p.target
                    alphas = compute_alphas(beta, _target_profile(p, wanted), scenario.optimal_alpha)
                    schedule = LrpSchedule(alpha=alphas, beta=beta)
                    x = optimize(schedule, p.spec).profile.values
                    outcome.deviations[p.id] = deviation_metrics(x, wanted)
                else:
                    schedule = LrpSchedule.day_ahead(beta)
                    x = outcome.fleet_schedule.profiles[p.id]
            except (LrpError, ValidationError) as e:
                raise ScenarioError(f"day {day}, {mode.value}, customer '{p.id}': {e}") from e
            schedules[p.id] = schedule
            profiles[p.id] = x
        outcome.schedules[mode] = schedules
        outcome.profiles[mode] = profiles
    logger.info(f"Scenario '{scenario.name}' day {day} finished")
    return outcome


def _metered(p: Participant, x: np.ndarray, schedule: LrpSchedule):
    """Priced quantity and its cost; base load on a separate meter pays beta only."""
    base = p.base if p.base is not None else np.zeros(x.size)
    if p.spec.metering == Metering.SHARED:
        metered = x + base
        return metered, period_costs(schedule, metered)
    return x, period_costs(schedule, x) + schedule.beta.values * base


def _bill_frame(prepared: PreparedScenario, outcomes: List[DayOutcome], mode: TariffMode) -> pd.DataFrame:
    n = prepared.scenario.periods_per_day
    records = []
    for outcome in outcomes:
        for p in prepared.participants:
            schedule = outcome.schedules[mode][p.id]
            x = outcome.profiles[mode][p.id]
            base = p.base if p.base is not None else np.zeros(x.size)
            metered, cost = _metered(p, x, schedule)
            price = marginal_prices(schedule, metered)
            for t in range(n):
                records.append(
                    {
                        "tariff": mode.value,
                        "day": outcome.day,
                        "period": outcome.day * n + t,
                        "customer": p.id,
                        "customer_class": p.customer_class,
                        "energy_kwh": float(x[t]),
                        "base_kwh": float(base[t]),
                        "beta": float(schedule.beta.values[t]),
                        "alpha": float(schedule.alpha.values[t]),
                        "price": float(price[t]),
                        "cost": float(cost[t]),
                    }
                )
    return pd.DataFrame.from_records(records)


def _bill_social_cost(frame: pd.DataFrame) -> float:
    """social_cost of one tariff's bill rows; every customer's metered horizon at beta."""
    metered = frame.assign(kwh=frame["energy_kwh"] + frame["base_kwh"])
    loads = metered.pivot(index="period", columns="customer", values="kwh").sort_index()
    beta = metered.groupby("period", sort=True)["beta"].first()
    return social_cost({c: loads[c].to_numpy() for c in loads.columns}, beta.to_numpy())


def _price_metrics_frame(prepared: PreparedScenario, outcomes: List[DayOutcome], mode: TariffMode) -> pd.DataFrame:
    records = []
    for outcome in outcomes:
        for p in prepared.participants:
            schedule = outcome.schedules[mode][p.id]
            metered, _ = _metered(p, outcome.profiles[mode][p.id], schedule)
            metrics = price_increase_metrics(schedule, LoadProfile.from_array(metered))
            records.append({"tariff": mode.value, "day": outcome.day, "customer": p.id, **metrics})
    return pd.DataFrame.from_records(records)


def _with_price_metrics(row: ComparisonRow, frame: pd.DataFrame) -> ComparisonRow:
    return row.model_copy(
        update={
            "max_price_increase": float(frame["max_price_increase"].max()),
            "max_received_drop": float(frame["max_received_drop"].max()),
        }
    )


def _voltage_frames(prepared: PreparedScenario, outcomes: List[DayOutcome], mode: TariffMode):
    feeder, n = prepared.feeder, prepared.scenario.periods_per_day
    placed = [p for p in prepared.participants if p.node is not None]
    days = []
    for outcome in outcomes:
        loads = [
            NodeLoad(
                node=p.node,
                base_kwh=p.base if p.base is not None else np.zeros(n),
                controllable_kwh=outcome.profiles[mode][p.id],
            )
            for p in placed
        ]
        days.append(horizon_voltages(feeder, build_injections(feeder, loads, prepared.scenario.period_hours)))
    v2 = np.concatenate(days)
    first_day = outcomes[0].day
    report = check_violations(
        feeder, v2, periods_per_day=n, v_min=prepared.scenario.v_min, period_offset=first_day * n
    )
    rows = [
        {"period": first_day * n + t, "node": feeder.node_ids[i], "phase": PHASES[k], "v_pu": float(report.v_pu[t, i, k])}
        for t in range(v2.shape[0])
        for i in range(feeder.n_nodes)
        for k in range(len(PHASES))
        if feeder.phase_mask[i, k]
    ]
    voltages = pd.DataFrame.from_records(rows, columns=["period", "node", "phase", "v_pu"])
    lows = {(node, phase, period) for node, phase, period in report.violations}
    violations = voltages[[(r.node, r.phase, r.period) in lows for r in voltages.itertuples()]]
    return report, voltages, violations.reset_index(drop=True)


def _percent_of(value: float, baseline: Optional[float]) -> Optional[float]:
    if baseline is None or baseline == 0:
        return None
    return 100.0 * (value - baseline) / baseline


def summary_frame(report: ComparisonReport) -> pd.DataFrame:
    classes = sorted({c for row in report.rows for c in row.costs})
    records = []
    for row in report.rows:
        record = {
            "tariff": row.tariff.value,
            "min_voltage_pu": None if row.min_voltage_pu is None else round(row.min_voltage_pu, 4),
            "violation_days": row.violation_days,
        }
        for c in classes:
            record[f"cost_{c}"] = round(row.costs.get(c, 0.0), 2)
        record["social_cost"] = round(row.social_cost, 2)
        record["pct_diff"] = _rounded(row.pct_diff, 2)
        for c in classes:
            record[f"pct_{c}"] = _rounded(row.pct_by_class.get(c), 2)
        record["max_price_increase"] = _rounded(row.max_price_increase, 6)
        record["max_received_drop"] = _rounded(row.max_received_drop, 6)
        records.append(record)
    return pd.DataFrame.from_records(records)


def _rounded(value: Optional[float], digits: int) -> Optional[float]:
    return None if value is None else round(value, digits)


def _build_report(name: str, rows: List[ComparisonRow], output_dir: Optional[str]) -> ComparisonReport:
    """Fills the percent columns against the day-ahead row, if there is one."""
    baseline = next((r for r in rows if r.tariff == TariffMode.DAY_AHEAD), None)
    social = baseline.social_cost if baseline else None
    by_class = baseline.costs if baseline else {}
    rows = [
        r.model_copy(
            update={
                "pct_diff": _percent_of(r.social_cost, social),
                "pct_by_class": {c: _percent_of(v, by_class.get(c)) for c, v in r.costs.items()},
            }
        )
        for r in rows
    ]
    return ComparisonReport(scenario=name, rows=rows, output_dir=output_dir)


def run_scenario(scenario: Scenario, out_dir: Optional[Union[str, Path]] = None) -> ComparisonReport:
    prepared = prepare(scenario)
    days = range(scenario.horizon_days)
    if settings.MAX_WORKERS > 1:
        with ThreadPoolExecutor(max_workers=settings.MAX_WORKERS) as pool:
            outcomes = list(pool.map(lambda d: run_day(prepared, d), days))
    else:
        outcomes = [run_day(prepared, d) for d in days]

    out = Path(out_dir) if out_dir else (scenario.resolve(scenario.output_dir) if scenario.output_dir else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    rows, bills, price_metrics = [], [], []
    for mode in scenario.tariffs:
        frame = _bill_frame(prepared, outcomes, mode)
        bills.append(frame)
        metrics = _price_metrics_frame(prepared, outcomes, mode)
        price_metrics.append(metrics)
        costs = frame.groupby("customer_class", sort=True)["cost"].sum()
        row = ComparisonRow(
            tariff=mode, costs={k: float(v) for k, v in costs.items()}, social_cost=_bill_social_cost(frame)
        )
        row = _with_price_metrics(row, metrics)
        if prepared.feeder is not None:
            report, voltages, violations = _voltage_frames(prepared, outcomes, mode)
            row = row.model_copy(
                update={"min_voltage_pu": report.min_voltage, "violation_days": report.violation_days}
            )
            if out is not None:
                voltages.to_csv(out / f"voltages_{mode.value}.csv", index=False)
                violations.to_csv(out / f"violations_{mode.value}.csv", index=False)
        rows.append(row)

    result = _build_report(scenario.name, rows, str(out) if out else None)
    if out is not None:
        n = scenario.periods_per_day
        pd.DataFrame(
            {"period": np.arange(prepared.prices.size), "beta": prepared.prices, "source": prepared.price_source}
        ).to_csv(out / "prices.csv", index=False)
        bill_frame = pd.concat(bills, ignore_index=True)
        bill_frame.to_csv(out / "bills.csv", index=False)
        bill_frame[["tariff", "day", "period", "customer", "customer_class", "energy_kwh", "base_kwh"]].to_csv(
            out / "profiles.csv", index=False
        )
        pd.concat(price_metrics, ignore_index=True).to_csv(out / "price_metrics.csv", index=False)
        if prepared.fleet is not None and outcomes[0].fleet_schedule is not None:
            pd.concat(
                [lrp_io.schedule_frame(o.fleet_schedule, prepared.fleet, o.day * n) for o in outcomes],
                ignore_index=True,
            ).to_csv(out / "schedule.csv", index=False)
        deviations = [
            {"day": o.day, "customer": cid, "linf_kwh": m.linf, "l1_kwh": m.l1}
            for o in outcomes
            for cid, m in sorted(o.deviations.items())
        ]
        if deviations:
            pd.DataFrame.from_records(deviations).to_csv(out / "deviations.csv", index=False)
        summary_frame(result).to_csv(out / "summary.csv", index=False)
        logger.info(f"Wrote scenario '{scenario.name}' reports to {out}")
    return result


def report(out_dir: Union[str, Path], name: str = "report", periods_per_day: int = 24) -> ComparisonReport:
    """Recompute the summary from stored bills, price metrics and voltage CSVs."""
    out = Path(out_dir)
    bills_path = out / "bills.csv"
    if not bills_path.is_file():
        raise ScenarioError(f"no bills.csv in {out}")
    bills = pd.read_csv(bills_path)
    metrics_path = out / "price_metrics.csv"
    metrics = pd.read_csv(metrics_path) if metrics_path.is_file() else None
    rows = []
    for tariff in dict.fromkeys(bills["tariff"]):
        frame = bills[bills["tariff"] == tariff]
        costs = frame.groupby("customer_class", sort=True)["cost"].sum()
        row = ComparisonRow(
            tariff=TariffMode(tariff),
            costs={k: float(v) for k, v in costs.items()},
            social_cost=_bill_social_cost(frame),
        )
        if metrics is not None:
            row = _with_price_metrics(row, metrics[metrics["tariff"] == tariff])
        voltages_path = out / f"voltages_{tariff}.csv"
        if voltages_path.is_file():
            voltages = pd.read_csv(voltages_path)
            violations = pd.read_csv(out / f"violations_{tariff}.csv")
            days = (violations["period"] // periods_per_day).nunique() if len(violations) else 0
            row = row.model_copy(
                update={"min_voltage_pu": float(voltages["v_pu"].min()), "violation_days": int(days)}
            )
        rows.append(row)
    result = _build_report(name, rows, str(out))
    summary_frame(result).to_csv(out / "summary.csv", index=False)
    return result
