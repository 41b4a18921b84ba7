"""Command line entry point: python -m app.cli <command> ..."""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import LrpError
from app.core.logging import setup_logging
from app.schemas.enums import TariffMode
from app.schemas.pricing import OptimalAlphaConfig, TargetProfile
from app.schemas.tariff import AlphaSchedule, LoadProfile, LrpSchedule, PriceSchedule
from app.services import io as lrp_io
from app.services import ir_lrp, optimal_alpha
from app.services.customer_optimizer import optimize
from app.services.simulation import report, run_scenario, summary_frame, synthetic_prices

logger = logging.getLogger(__name__)


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="lrp", description="Load-responsive pricing tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    price = sub.add_parser("price", help="Emit per-day alpha/beta schedules as CSV.")
    price.add_argument("--prices", type=Path, required=True, help="CSV with period,beta.")
    price.add_argument("--mode", type=TariffMode, choices=list(TariffMode)[:3], default=TariffMode.IR_LRP)
    price.add_argument("--tau-min", type=float, default=ir_lrp.SINGLE_CUSTOMER_TAU_RANGE[0])
    price.add_argument("--tau-max", type=float, default=ir_lrp.SINGLE_CUSTOMER_TAU_RANGE[1])
    price.add_argument("--eta", type=float, default=1e-3)
    price.add_argument("--target", type=Path, help="CSV with period,x_hat_kwh (optimal_alpha).")
    price.add_argument("--alpha-seed", type=float, default=settings.DEFAULT_ALPHA_SEED)
    price.add_argument("--theta", type=float, default=settings.DEFAULT_THETA)
    price.add_argument("--days", type=int, default=1, help="Days of synthetic prices when --seed is set.")
    price.add_argument("--seed", type=int, default=None, help="Draw a synthetic multi-day price series.")
    price.add_argument("--out", type=Path, required=True, help="Output CSV.")

    opt = sub.add_parser("optimize", help="Optimize one customer against a tariff CSV.")
    opt.add_argument("--tariff", type=Path, required=True, help="CSV with period,beta[,alpha].")
    opt.add_argument("--customer", type=Path, required=True, help="Customer spec JSON.")
    opt.add_argument("--period-hours", type=float, default=1.0)
    opt.add_argument("--out", type=Path, required=True, help="Output CSV period,x_kwh,marginal_price.")

    sim = sub.add_parser("simulate", help="Run a scenario end to end.")
    sim.add_argument("--scenario", type=Path, required=True)
    sim.add_argument("--out", type=Path, default=None, help="Overrides the scenario output_dir.")

    rep = sub.add_parser("report", help="Recompute summary.csv from stored run CSVs.")
    rep.add_argument("--out", type=Path, required=True, help="Directory of a previous simulate run.")
    rep.add_argument("--periods-per-day", type=int, default=24)

    serve = sub.add_parser("serve", help="Start the HTTP API.")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=8000)
    return parser.parse_args(argv)


def _price(args: argparse.Namespace) -> None:
    beta, _ = lrp_io.read_tariff_csv(args.prices)
    base = PriceSchedule(beta=beta.tolist())
    if args.seed is not None:
        series = synthetic_prices(base, args.days, args.seed).reshape(args.days, -1)
        logger.info(f"Synthetic prices: {args.days} day(s) drawn with seed {args.seed}")
    else:
        series = beta[None, :]

    target = None
    if args.mode == TariffMode.OPTIMAL_ALPHA:
        if args.target is None:
            raise LrpError("--target is required for optimal_alpha")
        target = TargetProfile(x_hat=LoadProfile.from_array(lrp_io.read_target_csv(args.target)))
    config = OptimalAlphaConfig(alpha_seed=args.alpha_seed, theta=args.theta)

    schedules = []
    for values in series:
        prices = PriceSchedule(beta=values.tolist())
        if args.mode == TariffMode.IR_LRP:
            alphas = ir_lrp.compute(prices, (args.tau_min, args.tau_max), args.eta)
        elif args.mode == TariffMode.OPTIMAL_ALPHA:
            alphas = optimal_alpha.compute_alphas(prices, target, config)
        else:
            alphas = AlphaSchedule.zeros(prices.n_periods)
        schedules.append(LrpSchedule(alpha=alphas, beta=prices))
    lrp_io.write_tariff_csv(schedules, args.out)
    logger.info(f"Wrote {args.mode.value} tariff to {args.out}")


def _optimize(args: argparse.Namespace) -> None:
    beta, alpha = lrp_io.read_tariff_csv(args.tariff)
    prices = PriceSchedule(beta=beta.tolist(), period_hours=args.period_hours)
    alphas = AlphaSchedule(alpha=alpha.tolist()) if alpha is not None else AlphaSchedule.zeros(beta.size)
    schedule = LrpSchedule(alpha=alphas, beta=prices)
    result = optimize(schedule, lrp_io.load_customer_spec(args.customer))
    lrp_io.write_result_csv(schedule, result.profile, args.out)
    logger.info(f"Optimal cost ${result.cost_usd:.4f}, lambda*={result.lambda_star:.6g}; wrote {args.out}")


def _simulate(args: argparse.Namespace) -> None:
    result = run_scenario(lrp_io.load_scenario(args.scenario), out_dir=args.out)
    print(summary_frame(result).to_string(index=False))


def _report(args: argparse.Namespace) -> None:
    result = report(args.out, periods_per_day=args.periods_per_day)
    print(summary_frame(result).to_string(index=False))


def _serve(args: argparse.Namespace) -> None:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port)


COMMANDS = {
    "price": _price,
    "optimize": _optimize,
    "simulate": _simulate,
    "report": _report,
    "serve": _serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    setup_logging()
    try:
        COMMANDS[args.command](args)
    except (LrpError, ValidationError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
