import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from app.core.errors import LrpError, ScenarioError
from app.schemas.enums import TariffMode
from app.schemas.scenario import Scenario
from app.schemas.tariff import AlphaSchedule, LoadProfile, LrpSchedule, PriceSchedule
from app.services.io import load_scenario
from app.services.simulation import (
    deviation_metrics,
    price_increase_metrics,
    report,
    run_scenario,
    social_cost,
    synthetic_prices,
)
from tests.conftest import DATA_DIR, DAY_AHEAD_BETA

PRICE_FILE = str(DATA_DIR / "day_ahead_prices.csv")


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    return run_scenario(load_scenario(DATA_DIR / "desk_scenario.json"), out_dir=out), out


@pytest.fixture(scope="module")
def desk_shared_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk_shared")
    return run_scenario(load_scenario(DATA_DIR / "desk_shared_scenario.json"), out_dir=out), out


@pytest.fixture(scope="module")
def household_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("household")
    return run_scenario(load_scenario(DATA_DIR / "household_scenario.json"), out_dir=out), out


def _profile(out, tariff, customer, day=0):
    bills = pd.read_csv(out / "bills.csv")
    rows = bills[(bills["tariff"] == tariff) & (bills["customer"] == customer) & (bills["day"] == day)]
    return rows.sort_values("period")["energy_kwh"].to_numpy()


def test_social_cost_sums_every_profile():
    beta = [0.1, 0.2]
    assert social_cost({"a": [1.0, 2.0], "b": [0.0, 1.0]}, beta) == pytest.approx(0.7)
    with pytest.raises(LrpError):
        social_cost({"a": [1.0]}, beta)


def test_deviation_metrics():
    m = deviation_metrics([1.0, 2.5, 3.0], [1.0, 2.0, 4.0])
    assert m.per_period == pytest.approx([0.0, 0.5, 1.0])
    assert m.linf == pytest.approx(1.0)
    assert m.l1 == pytest.approx(1.5)


def test_price_increase_metrics():
    schedule = LrpSchedule(alpha=AlphaSchedule(alpha=[0.01, 0.02]), beta=PriceSchedule(beta=[0.1, 0.2]))
    metrics = price_increase_metrics(schedule, LoadProfile(x=[5.0, -3.0]))
    assert metrics["max_price_increase"] == pytest.approx(0.05)
    assert metrics["max_received_drop"] == pytest.approx(0.06)


def test_synthetic_prices_are_reproducible(day_ahead_prices):
    a = synthetic_prices(day_ahead_prices, days=3, seed=7)
    assert a.shape == (72,)
    assert (a > 0).all()
    assert np.array_equal(a, synthetic_prices(day_ahead_prices, days=3, seed=7))
    assert not np.array_equal(a, synthetic_prices(day_ahead_prices, days=3, seed=8))
    with pytest.raises(LrpError):
        synthetic_prices(day_ahead_prices, days=0, seed=7)


def test_household_day_ahead_profile(household_run):
    _, out = household_run
    expected = np.zeros(24)
    expected[[10, 11, 12]] = 20.0
    expected[18] = -10.0
    assert _profile(out, "day_ahead", "household") == pytest.approx(expected)


def test_household_optimal_alpha_tracks_target(household_run):
    result, out = household_run
    deviations = pd.read_csv(out / "deviations.csv")
    assert deviations["linf_kwh"].max() < 0.06
    assert _profile(out, "optimal_alpha", "household").sum() == pytest.approx(50.0, abs=1e-8)
    assert result.row(TariffMode.OPTIMAL_ALPHA).costs["residential"] > 0


def test_household_ir_lrp_spreads_load(household_run):
    _, out = household_run
    x = _profile(out, "ir_lrp", "household")
    assert int((x > 1e-6).sum()) > 3


def test_household_summary_has_no_voltage_columns(household_run):
    result, out = household_run
    summary = pd.read_csv(out / "summary.csv")
    assert summary["tariff"].tolist() == ["day_ahead", "ir_lrp", "optimal_alpha"]
    assert summary["min_voltage_pu"].isna().all()
    assert result.row(TariffMode.DAY_AHEAD).pct_diff == pytest.approx(0.0)


def test_desk_week_violations(desk_run):
    result, _ = desk_run
    assert result.row(TariffMode.DAY_AHEAD).violation_days == 7
    for mode in (TariffMode.CENTRALIZED_LDF, TariffMode.OPTIMAL_ALPHA, TariffMode.IR_LRP):
        assert result.row(mode).violation_days == 0
    assert result.row(TariffMode.CENTRALIZED_LDF).min_voltage_pu == pytest.approx(0.95, abs=1e-8)


def test_desk_week_prices_vary_by_day(desk_run):
    _, out = desk_run
    prices = pd.read_csv(out / "prices.csv")
    assert len(prices) == 7 * 24
    assert (prices["source"] == "synthetic").all()
    days = prices["beta"].to_numpy().reshape(7, 24)
    assert not np.allclose(days[0], days[1])
    assert (days > 0).all()


def test_desk_optimal_alpha_reproduces_schedule(desk_run):
    result, out = desk_run
    schedule = pd.read_csv(out / "schedule.csv")
    for building in ("office", "warehouse"):
        for day in range(7):
            x_tilde = schedule[schedule["building"] == building].sort_values("period")["x_tilde_kwh"].to_numpy()
            x_tilde = x_tilde[day * 24:(day + 1) * 24]
            assert _profile(out, "optimal_alpha", building, day) == pytest.approx(x_tilde, abs=1e-3)
    assert pd.read_csv(out / "deviations.csv")["linf_kwh"].max() < 1e-3
    central = result.row(TariffMode.CENTRALIZED_LDF).social_cost
    assert result.row(TariffMode.OPTIMAL_ALPHA).social_cost == pytest.approx(central, rel=1e-6)


def test_desk_cost_ordering(desk_run):
    result, _ = desk_run
    day_ahead = result.row(TariffMode.DAY_AHEAD)
    central = result.row(TariffMode.CENTRALIZED_LDF)
    optimal = result.row(TariffMode.OPTIMAL_ALPHA)
    assert day_ahead.social_cost <= central.social_cost
    assert day_ahead.social_cost <= result.row(TariffMode.IR_LRP).social_cost
    assert central.pct_diff > 0
    # centralized charging is billed at beta; the LRP adds alpha * x**2 on top
    assert sum(central.costs.values()) == pytest.approx(central.social_cost)
    assert sum(optimal.costs.values()) > optimal.social_cost


def test_desk_cost_ordering_per_class(desk_run):
    result, out = desk_run
    day_ahead = result.row(TariffMode.DAY_AHEAD)
    central = result.row(TariffMode.CENTRALIZED_LDF)
    optimal = result.row(TariffMode.OPTIMAL_ALPHA)
    for c in ("office", "warehouse"):
        # each building could have charged on the centralized schedule alone
        assert day_ahead.costs[c] <= central.costs[c] + 1e-9
        assert central.costs[c] <= optimal.costs[c] + 1e-6
        assert day_ahead.pct_by_class[c] == 0.0
        assert central.pct_by_class[c] >= -1e-9
    assert max(central.pct_by_class.values()) > 0
    summary = pd.read_csv(out / "summary.csv").set_index("tariff")
    assert summary.loc["day_ahead", "pct_office"] == 0.0
    assert summary.loc["centralized_ldf", "pct_warehouse"] == pytest.approx(central.pct_by_class["warehouse"], abs=0.01)


def test_desk_social_cost_matches_bills(desk_run):
    result, out = desk_run
    bills = pd.read_csv(out / "bills.csv")
    beta = pd.read_csv(out / "prices.csv")["beta"].to_numpy()
    for row in result.rows:
        frame = bills[bills["tariff"] == row.tariff.value].sort_values("period")
        profiles = {
            c: (g["energy_kwh"] + g["base_kwh"]).to_numpy() for c, g in frame.groupby("customer", sort=True)
        }
        assert row.social_cost == pytest.approx(social_cost(profiles, beta), rel=1e-12)


def test_desk_price_metrics(desk_run):
    result, out = desk_run
    metrics = pd.read_csv(out / "price_metrics.csv")
    assert set(metrics["tariff"]) == {"day_ahead", "centralized_ldf", "optimal_alpha", "ir_lrp"}
    assert len(metrics) == 4 * 7 * 2
    assert result.row(TariffMode.DAY_AHEAD).max_price_increase == 0.0
    assert result.row(TariffMode.CENTRALIZED_LDF).max_price_increase == 0.0
    assert result.row(TariffMode.IR_LRP).max_price_increase > 0
    assert result.row(TariffMode.IR_LRP).max_received_drop == 0.0
    ir = metrics[metrics["tariff"] == "ir_lrp"]
    assert ir["max_price_increase"].max() == pytest.approx(result.row(TariffMode.IR_LRP).max_price_increase)


def test_desk_shared_meter(desk_shared_run):
    result, out = desk_shared_run
    assert result.row(TariffMode.DAY_AHEAD).violation_days == 2
    for mode in (TariffMode.CENTRALIZED_LDF, TariffMode.OPTIMAL_ALPHA, TariffMode.IR_LRP):
        assert result.row(mode).violation_days == 0
    assert pd.read_csv(out / "deviations.csv")["linf_kwh"].max() < 1e-6

    schedule = pd.read_csv(out / "schedule.csv")
    bills = pd.read_csv(out / "bills.csv")
    x_tilde = schedule[schedule["building"] == "office"].sort_values("period")["x_tilde_kwh"].to_numpy()
    office = bills[(bills["tariff"] == "optimal_alpha") & (bills["customer"] == "office")].sort_values("period")
    idle = x_tilde <= 0.0
    assert idle.any()
    # hours with base load only are not priced above beta
    assert (office["alpha"].to_numpy()[idle] == 0.0).all()
    assert (office["base_kwh"] > 0).all()


def test_runs_are_byte_identical(tmp_path):
    scenario = load_scenario(DATA_DIR / "desk_scenario.json").model_copy(update={"horizon_days": 2})
    run_scenario(scenario, out_dir=tmp_path / "a")
    run_scenario(scenario, out_dir=tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "bills.csv" in names and "summary.csv" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_recomputes_summary(desk_run):
    result, out = desk_run
    recomputed = report(out, name=result.scenario)
    for row in result.rows:
        again = recomputed.row(row.tariff)
        assert again.violation_days == row.violation_days
        assert again.social_cost == pytest.approx(row.social_cost, rel=1e-9)
        assert again.min_voltage_pu == pytest.approx(row.min_voltage_pu, abs=1e-9)
        assert again.pct_diff == pytest.approx(row.pct_diff, abs=1e-6)
        for c, pct in row.pct_by_class.items():
            assert again.pct_by_class[c] == pytest.approx(pct, abs=1e-6)
        assert again.max_price_increase == pytest.approx(row.max_price_increase, rel=1e-9)
        assert again.max_received_drop == pytest.approx(row.max_received_drop, abs=1e-12)


def test_report_without_bills(tmp_path):
    with pytest.raises(ScenarioError):
        report(tmp_path)


def test_scenario_validation():
    with pytest.raises(ValidationError):
        Scenario(name="x", price_file=PRICE_FILE, tariffs=["day_ahead"])
    with pytest.raises(ValidationError):
        Scenario(
            name="x",
            price_file=PRICE_FILE,
            tariffs=["centralized_ldf"],
            customers=[{"id": "c", "customer_class": "r", "spec_file": "c.json"}],
        )
    with pytest.raises(ValidationError):
        Scenario(
            name="x",
            price_file=PRICE_FILE,
            tariffs=["optimal_alpha"],
            customers=[{"id": "c", "customer_class": "r", "spec_file": "c.json"}],
        )


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "absent.json")


def test_zero_ev_building_has_no_target(tmp_path):
    fleet = {
        "buildings": [
            {"name": "empty", "node": "1", "building_type": "office", "ev_count": 0,
             "local_limit_kw": 50.0, "base_load": [5.0] * 24}
        ]
    }
    (tmp_path / "fleet.json").write_text(json.dumps(fleet))
    scenario = Scenario(
        name="zero",
        price_file=PRICE_FILE,
        tariffs=["day_ahead", "optimal_alpha"],
        fleet_file=str(tmp_path / "fleet.json"),
    )
    with pytest.raises(ScenarioError, match="empty"):
        run_scenario(scenario)


def test_single_day_bill_matches_beta(tmp_path):
    spec = {"total_energy_kwh": 10.0, "consume_bound_kw": 10.0, "local_limit_kw": 10.0}
    scenario = Scenario(
        name="one",
        price_file=PRICE_FILE,
        tariffs=["day_ahead"],
        customers=[{"id": "c", "customer_class": "r", "spec": spec}],
    )
    result = run_scenario(scenario, out_dir=tmp_path)
    assert result.row(TariffMode.DAY_AHEAD).costs["r"] == pytest.approx(10.0 * min(DAY_AHEAD_BETA))
    bills = pd.read_csv(tmp_path / "bills.csv")
    assert len(bills) == 24
    assert (bills["alpha"] == 0).all()
