from pathlib import Path

import numpy as np
import pytest

from app.schemas.customer import CustomerSpec
from app.schemas.pricing import TargetProfile
from app.schemas.tariff import LoadProfile, PriceSchedule

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

DAY_AHEAD_BETA = [
    0.2198, 0.2074, 0.2044, 0.1945, 0.2081, 0.2632, 0.3349, 0.3226,
    0.2318, 0.1773, 0.1479, 0.1397, 0.1455, 0.1630, 0.1711, 0.1839,
    0.2739, 0.4124, 0.5185, 0.4680, 0.4213, 0.3841, 0.3393, 0.2833,
]

# IR-LRP, tau in [0.1, 1.5], eta = 0.001; alpha in 1e-4 $/kWh^2
IR_LRP_TAU = [
    0.83, 0.95, 1.01, 1.07, 0.89, 0.71, 0.47, 0.53, 0.77, 1.20, 1.38, 1.50,
    1.44, 1.32, 1.26, 1.13, 0.65, 0.28, 0.10, 0.16, 0.22, 0.34, 0.40, 0.59,
]
IR_LRP_ALPHA_E4 = [
    8.30, 9.52, 10.13, 10.74, 8.91, 7.09, 4.65, 5.26, 7.70, 11.96, 13.78, 15.00,
    14.39, 13.17, 12.57, 11.35, 6.48, 2.83, 1.00, 1.61, 2.22, 3.43, 4.04, 5.87,
]

HOUSEHOLD_TARGET = [0, 0, 0, 0, 0, 0, 0, 0, 10, 2, 12, 15, 13, 3, 5, 0, 0, 0, -10, 0, 0, 0, 0, 0]
HOUSEHOLD_ALPHA = {9: 0.0136, 10: 0.0035, 11: 0.0031, 12: 0.0033, 13: 0.0115, 14: 0.0061, 18: 0.0143}


@pytest.fixture
def day_ahead_prices() -> PriceSchedule:
    return PriceSchedule(beta=DAY_AHEAD_BETA)


@pytest.fixture
def household_spec() -> CustomerSpec:
    # 60 kWh consumed and 10 kWh exported: net 50 kWh
    return CustomerSpec(
        total_energy_kwh=50.0,
        consume_bound_kw=20.0,
        inject_bound_kw=10.0,
        export_energy_kwh=10.0,
        local_limit_kw=20.0,
    )


@pytest.fixture
def household_target() -> TargetProfile:
    return TargetProfile(
        x_hat=LoadProfile(x=[float(v) for v in HOUSEHOLD_TARGET]),
        controllable_is_bidirectional=True,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240301)
