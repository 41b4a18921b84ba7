"""Optimal-alpha LRP: slopes that make a cost-minimizing customer land on a target.

For every loaded period the slope is chosen so that 2 * alpha_t * x_hat_t + beta_t
equals the seed's stationarity value lambda* = 2 * alpha_seed * x_hat_seed + beta_seed.
Periods where that slope is infinite or negative get theta instead.
"""
import logging

import numpy as np

from app.core.errors import LrpError
from app.schemas.customer import CustomerSpec
from app.schemas.pricing import OptimalAlphaConfig, RoundtripReport, TargetProfile
from app.schemas.enums import Metering
from app.schemas.tariff import AlphaSchedule, LoadProfile, LrpSchedule, PriceSchedule
from app.services.customer_optimizer import controllable_bounds, optimize

logger = logging.getLogger(__name__)


def _check_lengths(beta: PriceSchedule, target: TargetProfile) -> None:
    if beta.n_periods != target.x_hat.n_periods:
        raise LrpError(f"beta has {beta.n_periods} periods, target has {target.x_hat.n_periods}")


def _seed_energy_profile(target: TargetProfile) -> np.ndarray:
    # A shared unidirectional meter seeds on the controllable load alone.
    if target.shared_unidirectional:
        return target.controllable_values
    return target.x_hat.values


def select_seed(beta: PriceSchedule, target: TargetProfile) -> int:
    """Highest-beta period among those with strictly positive target load."""
    _check_lengths(beta, target)
    positive = _seed_energy_profile(target) > 0
    if not positive.any():
        raise LrpError("no period with strictly positive target load to seed from")
    # argmax returns the first maximum, i.e. the lowest period index on ties
    return int(np.argmax(np.where(positive, beta.values, -np.inf)))


def padded_target(target: TargetProfile, config: OptimalAlphaConfig) -> TargetProfile:
    """The target with its controllable part scaled by 1 + target_overestimate."""
    if not config.target_overestimate:
        return target
    base = target.base_values if target.metering == Metering.SHARED else np.zeros(target.x_hat.n_periods)
    x_hat = base + target.controllable_values * (1.0 + config.target_overestimate)
    return target.model_copy(update={"x_hat": LoadProfile.from_array(x_hat)})


def seed_multiplier(
    beta: PriceSchedule,
    target: TargetProfile,
    config: OptimalAlphaConfig = OptimalAlphaConfig(),
) -> float:
    """lambda* = 2 * alpha_seed * x_hat_seed + beta_seed, on the target after any overestimate."""
    target = padded_target(target, config)
    seed = select_seed(beta, target)
    return 2.0 * config.alpha_seed * _seed_energy_profile(target)[seed] + beta.values[seed]


def compute_alphas(
    beta: PriceSchedule,
    target: TargetProfile,
    config: OptimalAlphaConfig = OptimalAlphaConfig(),
) -> AlphaSchedule:
    _check_lengths(beta, target)
    target = padded_target(target, config)
    x_hat = target.x_hat.values
    controllable = target.controllable_values

    seed = select_seed(beta, target)
    shared_uni = target.shared_unidirectional
    theta = 0.0 if shared_uni else config.theta
    prices = beta.values
    lam_star = seed_multiplier(beta, target, config.model_copy(update={"target_overestimate": 0.0}))

    with np.errstate(divide="ignore", invalid="ignore"):
        raw = (lam_star - prices) / (2.0 * x_hat)
    raw[seed] = config.alpha_seed

    protected = ~np.isfinite(raw) | (raw < 0)
    if shared_uni:
        protected |= controllable <= 0
    protected[seed] = False
    alpha = np.where(protected, theta, raw)

    if config.reassign_seed_alpha:
        priced = ~protected
        priced[seed] = False
        if priced.any():
            alpha[seed] = float(alpha[priced].min())
            logger.info(f"Seed alpha at period {seed} reassigned to {alpha[seed]:.6g}")

    injecting = x_hat < 0
    if injecting.any() and x_hat[int(np.argmax(prices))] >= 0:
        logger.warning(
            f"Target injects at periods {np.flatnonzero(injecting).tolist()} but not at the "
            f"highest-beta period {int(np.argmax(prices))}; theta-protected periods will settle near zero"
        )
    logger.info(
        f"Optimal alpha: seed period {seed}, lambda*={lam_star:.6g}, "
        f"{int(protected.sum())} periods at theta={theta}"
    )
    return AlphaSchedule(alpha=[float(a) for a in alpha])


def verify_roundtrip(
    beta: PriceSchedule,
    target: TargetProfile,
    alphas: AlphaSchedule,
    spec: CustomerSpec,
    config: OptimalAlphaConfig = OptimalAlphaConfig(),
) -> RoundtripReport:
    """Re-optimize the customer under (alphas, beta) and compare with the target.

    lambda* is taken from the configured seed slope on the priced (padded) target,
    so it stays valid after the seed alpha is reassigned.
    """
    schedule = LrpSchedule(alpha=alphas, beta=beta)
    result = optimize(schedule, spec)
    wanted = target.controllable_values
    deviations = np.abs(result.profile.values - wanted)

    seed = select_seed(beta, padded_target(target, config))
    a = alphas.values
    lam_star = seed_multiplier(beta, target, config)
    lo, hi = controllable_bounds(beta, spec)
    bounds = []
    for t in range(beta.n_periods):
        if wanted[t] != 0 or t == seed:
            bounds.append(None)
        elif a[t] > 0:
            drift = (lam_star - beta.values[t]) / (2.0 * a[t])
            bounds.append(float(abs(np.clip(drift, lo[t], hi[t]))))
        else:
            bounds.append(None)

    worst = float(deviations.max())
    logger.info(f"Round trip: max deviation {worst:.3g} kWh at period {int(np.argmax(deviations))}")
    return RoundtripReport(
        deviations=deviations.tolist(),
        max_deviation=worst,
        theta_bounds=bounds,
        lambda_star=float(lam_star),
        seed_period=seed,
        result=result,
    )
