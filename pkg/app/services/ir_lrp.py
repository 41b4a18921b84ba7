"""Inverse-rank LRP: the k-th most expensive period gets the k-th smallest tau, alpha = tau * eta."""
import logging
from typing import Iterable, Tuple

import numpy as np

from app.core.errors import LrpError
from app.schemas.pricing import EtaClass, TauVector
from app.schemas.tariff import AlphaSchedule, PriceSchedule

logger = logging.getLogger(__name__)

# Default tau ranges: single customer vs. feeder-wide load shifting
SINGLE_CUSTOMER_TAU_RANGE = (0.1, 1.5)
FEEDER_TAU_RANGE = (0.1, 3.0)


def build_tau(n: int, tau_min: float, tau_max: float) -> TauVector:
    if n < 2:
        raise LrpError(f"need at least 2 periods for a tau vector, got {n}")
    if not 0 < tau_min < tau_max:
        raise LrpError(f"need 0 < tau_min < tau_max, got [{tau_min}, {tau_max}]")
    step = (tau_max - tau_min) / (n - 1)
    values = [tau_min + i * step for i in range(n)]
    values[-1] = tau_max
    return TauVector(values=values, tau_min=tau_min, tau_max=tau_max)


def rank_by_price(beta: PriceSchedule) -> np.ndarray:
    """Period indices from most to least expensive; earlier period ranks higher on ties."""
    return np.lexsort((np.arange(beta.n_periods), -beta.values))


def assign_inverse_rank(beta: PriceSchedule, tau: TauVector) -> np.ndarray:
    if len(tau.values) != beta.n_periods:
        raise LrpError(f"tau has {len(tau.values)} entries, beta has {beta.n_periods} periods")
    reindexed = np.empty(beta.n_periods)
    reindexed[rank_by_price(beta)] = np.sort(tau.values)
    return reindexed


def compute(beta: PriceSchedule, tau_range: Tuple[float, float], eta: float) -> AlphaSchedule:
    if not eta > 0:
        raise LrpError(f"eta must be > 0, got {eta}")
    tau = build_tau(beta.n_periods, *tau_range)
    alpha = assign_inverse_rank(beta, tau) * eta
    logger.debug(f"IR-LRP alphas on tau {tau_range} with eta={eta}: max {alpha.max():.4g}")
    return AlphaSchedule(alpha=alpha.tolist())


def alphas_for_class(
    beta: PriceSchedule,
    tau_range: Tuple[float, float],
    eta_table: Iterable[EtaClass],
    class_name: str,
) -> AlphaSchedule:
    for entry in eta_table:
        if entry.class_name == class_name:
            return compute(beta, tau_range, entry.eta)
    raise LrpError(f"no eta configured for customer class '{class_name}'")
