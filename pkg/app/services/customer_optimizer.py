"""Exact customer cost minimization under an LRP schedule.

The customer solves

    min  sum_t alpha_t * x_t**2 + beta_t * x_t
    s.t. sum_t x_t = X,  lo_t <= x_t <= hi_t

Stationarity gives 2 * alpha_t * x_t + beta_t = lambda on every period strictly
inside its box, so x_t(lambda) = clip((lambda - beta_t) / (2 * alpha_t), lo_t, hi_t)
and lambda is found by bisection on the nondecreasing map lambda -> sum_t x_t(lambda).
Periods with alpha_t == 0 are steps (lo below beta_t, hi above); energy left over
at a tied beta is handed out earliest period first.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import ConvergenceError, InfeasibleError, LrpError
from app.schemas.customer import CustomerSpec, KktReport, OptimizerResult
from app.schemas.enums import Metering
from app.schemas.tariff import LoadProfile, LrpSchedule, PriceSchedule
from app.services.tariff import period_costs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    lam: float
    iterations: int


def allocation_at(alpha: np.ndarray, beta: np.ndarray, lo: np.ndarray, hi: np.ndarray, lam: float) -> np.ndarray:
    """x_t(lambda) for every period; linear periods sit at lo when beta_t == lambda."""
    x = np.where(beta < lam, hi, lo).astype(float)
    curved = alpha > 0
    if curved.any():
        free = (lam - beta[curved]) / (2.0 * alpha[curved])
        x[curved] = np.clip(free, lo[curved], hi[curved])
    return x


def _effective_bounds(lo: np.ndarray, hi: np.ndarray, total: float) -> Tuple[np.ndarray, np.ndarray]:
    # No period can exceed what is left once every other period sits at its bound.
    eff_hi = np.minimum(hi, total - (lo.sum() - lo))
    hi_sum = hi.sum()
    eff_lo = np.maximum(lo, total - (hi_sum - hi)) if np.isfinite(hi_sum) else lo.copy()
    return eff_lo, eff_hi


def _settle_residual(
    x: np.ndarray,
    residual: float,
    tied: np.ndarray,
    alpha: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
) -> np.ndarray:
    if residual > 0:
        for t in tied:
            take = min(hi[t] - x[t], residual)
            x[t] += take
            residual -= take
    elif residual < 0:
        for t in tied[::-1]:
            take = min(x[t] - lo[t], -residual)
            x[t] -= take
            residual += take

    # Moving along 1/alpha keeps every free period on the same stationarity line.
    curved = alpha > 0
    for _ in range(4):
        if residual == 0.0:
            break
        free = curved & (x > lo) & (x < hi)
        if not free.any():
            break
        weights = 1.0 / alpha[free]
        moved = np.clip(x[free] + residual * weights / weights.sum(), lo[free], hi[free])
        residual -= float((moved - x[free]).sum())
        x[free] = moved

    if residual != 0.0:
        for t in range(x.size):
            room = hi[t] - x[t] if residual > 0 else lo[t] - x[t]
            take = min(room, residual) if residual > 0 else max(room, residual)
            x[t] += take
            residual -= take
            if residual == 0.0:
                break
    return x


def solve_separable_qp(
    alpha: np.ndarray,
    beta: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    total: float,
    *,
    bracket: Optional[Tuple[float, float]] = None,
    lambda_tol: Optional[float] = None,
    energy_tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> QpSolution:
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lambda_tol = settings.BISECTION_LAMBDA_TOL if lambda_tol is None else lambda_tol
    energy_tol = settings.ENERGY_TOL if energy_tol is None else energy_tol
    max_iter = settings.BISECTION_MAX_ITER if max_iter is None else max_iter

    if not (alpha.shape == beta.shape == lo.shape == hi.shape) or alpha.ndim != 1:
        raise LrpError("alpha, beta, lo and hi must be 1-D arrays of equal length")
    if np.isnan(alpha).any() or np.isnan(beta).any() or np.isnan(lo).any() or np.isnan(hi).any() or np.isnan(total):
        raise LrpError("NaN in optimizer inputs")
    if (alpha < 0).any():
        raise LrpError(f"negative alpha at periods {np.flatnonzero(alpha < 0).tolist()}")
    if not np.isfinite(lo).all():
        raise LrpError("lower bounds must be finite")
    if (lo > hi).any():
        raise InfeasibleError(f"lo > hi at periods {np.flatnonzero(lo > hi).tolist()}")

    scale = max(1.0, abs(total))
    e_tol = energy_tol * scale
    if total < lo.sum() - e_tol or total > hi.sum() + e_tol:
        raise InfeasibleError(
            f"energy {total:.6g} outside feasible range [{lo.sum():.6g}, {hi.sum():.6g}]"
        )

    lo_e, hi_e = _effective_bounds(lo, hi, total)
    curved = alpha > 0
    if bracket is None:
        knots_lo = np.where(curved, beta + 2.0 * alpha * lo_e, beta)
        knots_hi = np.where(curved, beta + 2.0 * alpha * hi_e, beta)
        a, b = float(knots_lo.min()) - 1.0, float(knots_hi.max()) + 1.0
    else:
        a, b = bracket
        if allocation_at(alpha, beta, lo_e, hi_e, a).sum() > total + e_tol or \
                allocation_at(alpha, beta, lo_e, hi_e, b).sum() < total - e_tol:
            raise LrpError(f"bracket [{a}, {b}] does not contain the multiplier")

    iterations = 0
    on_energy = False
    lam = 0.5 * (a + b)
    while iterations < max_iter:
        iterations += 1
        lam = 0.5 * (a + b)
        gap = allocation_at(alpha, beta, lo_e, hi_e, lam).sum() - total
        if abs(gap) <= e_tol:
            on_energy = True
            break
        if gap < 0:
            a = lam
        else:
            b = lam
        if b - a < lambda_tol:
            lam = 0.5 * (a + b)
            break
    else:
        raise ConvergenceError(f"bisection did not converge in {max_iter} iterations")

    x = allocation_at(alpha, beta, lo_e, hi_e, lam)
    tied = np.array([], dtype=int)
    if not on_energy:
        tied = np.flatnonzero(~curved & (beta >= a - lambda_tol) & (beta <= b + lambda_tol))
        x[tied] = lo_e[tied]
    x = _settle_residual(x, total - float(x.sum()), tied, alpha, lo_e, hi_e)
    logger.debug(f"Bisection finished after {iterations} iterations, lambda={lam:.12g}")
    return QpSolution(x=x, lam=float(lam), iterations=iterations)


def _base_load(spec: CustomerSpec, n_periods: int) -> np.ndarray:
    if spec.base_load is None:
        return np.zeros(n_periods)
    if spec.base_load.n_periods != n_periods:
        raise LrpError(f"base_load has {spec.base_load.n_periods} periods, expected {n_periods}")
    return spec.base_load.values


def controllable_bounds(beta: PriceSchedule, spec: CustomerSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Per-period box [lo_t, hi_t] (kWh) on the controllable load.

    An export requirement opens injection on the highest-beta periods (earlier
    period first on ties), inject_bound * period_hours each, until it is covered.
    """
    n = beta.n_periods
    h = beta.period_hours
    base = _base_load(spec, n)
    hi = np.minimum(spec.consume_bound_kw, spec.local_limit_kw - base / h) * h
    if (hi < 0).any():
        raise InfeasibleError(
            f"base load exceeds the local limit at periods {np.flatnonzero(hi < 0).tolist()}"
        )
    lo = np.zeros(n)
    if spec.export_energy_kwh > 0:
        if not spec.bidirectional:
            raise InfeasibleError("export_energy_kwh > 0 needs inject_bound_kw > 0")
        step = spec.inject_bound_kw * h
        remaining = spec.export_energy_kwh
        for t in np.lexsort((np.arange(n), -beta.values)):
            if remaining <= 0:
                break
            take = min(step, remaining)
            lo[t] = -take
            remaining -= take
        if remaining > settings.ENERGY_TOL * max(1.0, spec.export_energy_kwh):
            raise InfeasibleError(
                f"export of {spec.export_energy_kwh} kWh exceeds injection capacity {step * n} kWh"
            )
    return lo, hi


def _metered_problem(beta: PriceSchedule, spec: CustomerSpec):
    """Bounds and target on the priced quantity: controllable plus base on a shared meter."""
    lo, hi = controllable_bounds(beta, spec)
    shift = _base_load(spec, beta.n_periods) if spec.metering == Metering.SHARED else np.zeros(beta.n_periods)
    total = spec.total_energy_kwh + float(shift.sum())
    if spec.total_energy_kwh > hi.sum() + settings.ENERGY_TOL * max(1.0, abs(spec.total_energy_kwh)):
        raise InfeasibleError(
            f"total_energy_kwh {spec.total_energy_kwh} exceeds capacity {hi.sum():.6g} kWh"
        )
    return lo + shift, hi + shift, total, shift


def _kkt_report(alpha, beta, lo, hi, x, total, tol: float = 1e-9) -> KktReport:
    g = 2.0 * alpha * x + beta
    band = tol * np.maximum(1.0, np.abs(x))
    at_lo = x <= lo + band
    at_hi = x >= hi - band
    interior = ~(at_lo | at_hi)
    only_hi = at_hi & ~at_lo
    only_lo = at_lo & ~at_hi
    if interior.any():
        lam = float(np.median(g[interior]))
    else:
        floor = float(g[only_hi].max()) if only_hi.any() else None
        ceil = float(g[only_lo].min()) if only_lo.any() else None
        if floor is not None and ceil is not None:
            lam = 0.5 * (floor + ceil)
        else:
            lam = floor if floor is not None else (ceil if ceil is not None else 0.0)
    stationarity = float(np.abs(g[interior] - lam).max()) if interior.any() else 0.0
    upper = float(np.maximum(g[only_hi] - lam, 0.0).max()) if only_hi.any() else 0.0
    lower = float(np.maximum(lam - g[only_lo], 0.0).max()) if only_lo.any() else 0.0
    return KktReport(
        lambda_hat=lam,
        max_stationarity_residual=stationarity,
        upper_bound_violation=upper,
        lower_bound_violation=lower,
        energy_residual=abs(float(x.sum()) - total),
        interior_periods=np.flatnonzero(interior).tolist(),
    )


def optimize(schedule: LrpSchedule, spec: CustomerSpec, **tolerances) -> OptimizerResult:
    lo, hi, total, shift = _metered_problem(schedule.beta, spec)
    alpha = schedule.alpha.values
    beta = schedule.beta.values
    solution = solve_separable_qp(alpha, beta, lo, hi, total, **tolerances)
    report = _kkt_report(alpha, beta, lo, hi, solution.x, total)
    if report.max_stationarity_residual > 1e-6:
        logger.warning(f"KKT stationarity residual {report.max_stationarity_residual:.3g} after optimize")
    return OptimizerResult(
        profile=LoadProfile.from_array(solution.x - shift),
        lambda_star=solution.lam,
        kkt_residual=report.max_stationarity_residual,
        iterations=solution.iterations,
        cost_usd=float(period_costs(schedule, solution.x).sum()),
    )


def optimize_day_ahead(beta: PriceSchedule, spec: CustomerSpec) -> OptimizerResult:
    """alpha == 0 baseline: fill the cheapest periods to hi_t, earlier period first on ties."""
    lo, hi, total, shift = _metered_problem(beta, spec)
    e_tol = settings.ENERGY_TOL * max(1.0, abs(total))
    if total < lo.sum() - e_tol or total > hi.sum() + e_tol:
        raise InfeasibleError(
            f"energy {total:.6g} outside feasible range [{lo.sum():.6g}, {hi.sum():.6g}]"
        )
    prices = beta.values
    x = lo.copy()
    remaining = total - float(x.sum())
    marginal = float(prices.min())
    for t in np.lexsort((np.arange(beta.n_periods), prices)):
        if remaining <= 0:
            break
        take = min(hi[t] - x[t], remaining)
        if take > 0:
            x[t] += take
            remaining -= take
            marginal = float(prices[t])
    schedule = LrpSchedule.day_ahead(beta)
    return OptimizerResult(
        profile=LoadProfile.from_array(x - shift),
        lambda_star=marginal,
        kkt_residual=0.0,
        iterations=0,
        cost_usd=float(period_costs(schedule, x).sum()),
    )


def kkt_check(schedule: LrpSchedule, spec: CustomerSpec, profile: LoadProfile) -> KktReport:
    lo, hi, total, shift = _metered_problem(schedule.beta, spec)
    return _kkt_report(schedule.alpha.values, schedule.beta.values, lo, hi, profile.values + shift, total)
