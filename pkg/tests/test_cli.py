import pandas as pd
import pytest

from app.cli import main
from tests.conftest import DATA_DIR


def test_price_ir_lrp(tmp_path):
    out = tmp_path / "tariff.csv"
    assert main(["price", "--prices", str(DATA_DIR / "day_ahead_prices.csv"), "--eta", "0.001", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert len(frame) == 24
    assert frame.loc[18, "alpha"] == pytest.approx(1e-4)


def test_price_synthetic_days(tmp_path):
    out = tmp_path / "tariff.csv"
    argv = ["price", "--prices", str(DATA_DIR / "day_ahead_prices.csv"), "--mode", "day_ahead",
            "--days", "3", "--seed", "11", "--out", str(out)]
    assert main(argv) == 0
    frame = pd.read_csv(out)
    assert frame["period"].tolist() == list(range(72))
    assert (frame["alpha"] == 0).all()


def test_price_optimal_alpha_needs_target(tmp_path):
    argv = ["price", "--prices", str(DATA_DIR / "day_ahead_prices.csv"), "--mode", "optimal_alpha",
            "--out", str(tmp_path / "t.csv")]
    assert main(argv) == 1


def test_optimize_writes_profile(tmp_path):
    out = tmp_path / "x.csv"
    argv = ["optimize", "--tariff", str(DATA_DIR / "day_ahead_prices.csv"),
            "--customer", str(DATA_DIR / "household_customer.json"), "--out", str(out)]
    assert main(argv) == 0
    frame = pd.read_csv(out)
    assert frame["x_kwh"].sum() == pytest.approx(50.0, abs=1e-8)
    assert frame.loc[18, "x_kwh"] == pytest.approx(-10.0)


def test_simulate_and_report(tmp_path, capsys):
    assert main(["simulate", "--scenario", str(DATA_DIR / "household_scenario.json"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "summary.csv").is_file()
    first = (tmp_path / "summary.csv").read_text()
    assert main(["report", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "summary.csv").read_text() == first
    assert "optimal_alpha" in capsys.readouterr().out


def test_report_on_empty_dir_fails(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 1
