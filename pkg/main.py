"""
Command-line entry point for the datacenter power and market co-simulator.

Each subcommand loads a scenario file, runs one simulation, sweep or
settlement, and writes plain CSV/JSON results for plotting elsewhere.
"""

from typing import NoReturn
import argparse
import json
import logging
import sys
from pathlib import Path

from powermarket import (
    ConfigError,
    DataError,
    DomainError,
    FetchError,
    PowerMarketError,
    PriceFetcher,
    SimulationError,
    Simulator,
    aa_eval,
    load_price_book,
    load_scenario,
    parse_range,
    plot_data,
    read_report,
    settle,
    sweep_damping,
    sweep_procurement,
    sweep_sigma,
    sweet_spot,
    write_report,
    write_scenario,
)
from powermarket.reports import isp_energy


logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)


def _price_book(config):
    if not (config.spot_path and config.imbalance_path):
        raise ConfigError("This command needs market.spot_path and market.imbalance_path")
    return load_price_book(config.spot_path, config.imbalance_path)


def _out_dir(args, config) -> Path:
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> None:
    config = load_scenario(args.config)
    report = Simulator(config).run()
    write_report(report, _out_dir(args, config))


def cmd_sweep_damping(args) -> None:
    config = load_scenario(args.config)
    rows = sweep_damping(config, parse_range(args.factors), workers=args.workers)
    out = _out_dir(args, config)
    rows.to_csv(out / "damping.csv", index=False)

    usable = rows[rows["error"] == ""]
    try:
        spot = sweet_spot(usable)
    except DomainError as e:
        logging.warning(f"⚠️ No sweet spot: {e}")
        return
    with open(out / "sweet_spot.json", "w", encoding="utf-8") as handle:
        json.dump({"factor": spot.factor, "flag": spot.flag}, handle, sort_keys=True, indent=2)
    logging.info(f"🎯 Sweet spot at damping factor {spot.factor:.2f} ({spot.flag})")


def cmd_sweep_procurement(args) -> None:
    config = load_scenario(args.config)
    _, delivered = isp_energy(read_report(args.report))
    rows = sweep_procurement(delivered, _price_book(config), parse_range(args.q), parse_range(args.s))
    out = _out_dir(args, config)
    rows.to_csv(out / "procurement.csv", index=False)
    best = rows.loc[rows["total_eur"].idxmin()]
    logging.info(f"🏆 Cheapest: {best['strategy']} q={best['q']} s={best['s']} ({best['system']}-price) at {best['total_eur']:.2f} EUR")


def cmd_aa_eval(args) -> None:
    config = load_scenario(args.config)
    rows = aa_eval(_price_book(config), parse_range(args.sigma), args.seeds, config.seed, args.aa_mode or config.aa_mode)
    rows.to_csv(_out_dir(args, config) / "aa.csv", index=False)
    logging.info(f"🎲 AA from {rows['mean_aa'].iloc[0]:.3f} (sigma={rows['sigma'].iloc[0]:g}) to "
                 f"{rows['mean_aa'].iloc[-1]:.3f} (sigma={rows['sigma'].iloc[-1]:g})")


def cmd_sweep_sigma(args) -> None:
    config = load_scenario(args.config)
    rows = sweep_sigma(config, parse_range(args.sigma), args.seeds, workers=args.workers)
    rows.to_csv(_out_dir(args, config) / "sigma.csv", index=False)


def cmd_settle(args) -> None:
    config = load_scenario(args.config)
    scheduled, delivered = isp_energy(read_report(args.report))
    result = settle(_price_book(config), args.system, scheduled, delivered)
    result.to_frame().to_csv(Path(args.report) / f"settlement_{args.system}.csv", index=False)
    summary = {
        "system": args.system,
        "day_ahead_eur": result.day_ahead_cost,
        "shortage_eur": result.shortage_cost,
        "surplus_refund_eur": result.surplus_refund,
        "total_eur": result.total,
    }
    print(json.dumps(summary, sort_keys=True, indent=2))


def cmd_plot_data(args) -> None:
    rows = plot_data(args.report, args.figure)
    if args.out:
        rows.to_csv(args.out, index=False)
        logging.info(f"📝 {len(rows)} rows for figure {args.figure} written to {args.out}")
    else:
        rows.to_csv(sys.stdout, index=False)


def cmd_fetch_prices(args) -> None:
    PriceFetcher().download(args.url, args.out, args.kind)


def cmd_make_scenario(args) -> None:
    write_scenario(args.out, args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Datacenter power and electricity market co-simulator")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="run one scenario and write its report")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--out")
    simulate.set_defaults(handler=cmd_simulate)

    damping = commands.add_parser("sweep-damping", help="one scheduler run per damping factor")
    damping.add_argument("--config", required=True)
    damping.add_argument("--factors", default="0:110:2")
    damping.add_argument("--out")
    damping.add_argument("--workers", type=int, default=1)
    damping.set_defaults(handler=cmd_sweep_damping)

    procurement = commands.add_parser("sweep-procurement", help="settle a report under every (q, s) schedule")
    procurement.add_argument("--report", required=True)
    procurement.add_argument("--config", required=True)
    procurement.add_argument("--q", default="0:1:0.1")
    procurement.add_argument("--s", default="0.97:1.30:0.03")
    procurement.add_argument("--out")
    procurement.set_defaults(handler=cmd_sweep_procurement)

    aa = commands.add_parser("aa-eval", help="agreement accuracy of synthetic predictors")
    aa.add_argument("--config", required=True)
    aa.add_argument("--sigma", default="0:1200:50")
    aa.add_argument("--seeds", type=int, default=30)
    aa.add_argument("--aa-mode", choices=["literal", "conjunction"])
    aa.add_argument("--out")
    aa.set_defaults(handler=cmd_aa_eval)

    sigma = commands.add_parser("sweep-sigma", help="scheduler runs driven by noisier synthetic predictors")
    sigma.add_argument("--config", required=True)
    sigma.add_argument("--sigma", default="0:1200:100")
    sigma.add_argument("--seeds", type=int, default=5)
    sigma.add_argument("--out")
    sigma.add_argument("--workers", type=int, default=1)
    sigma.set_defaults(handler=cmd_sweep_sigma)

    settle_cmd = commands.add_parser("settle", help="settle a report under one price system")
    settle_cmd.add_argument("--report", required=True)
    settle_cmd.add_argument("--config", required=True)
    settle_cmd.add_argument("--system", choices=["one", "two"], required=True)
    settle_cmd.set_defaults(handler=cmd_settle)

    plot = commands.add_parser("plot-data", help="long-format series behind a figure")
    plot.add_argument("--report", required=True)
    plot.add_argument("--figure", choices=["loads", "costs", "damping", "aa", "dr"], required=True)
    plot.add_argument("--out")
    plot.set_defaults(handler=cmd_plot_data)

    fetch = commands.add_parser("fetch-prices", help="download and validate a price export")
    fetch.add_argument("--url", required=True)
    fetch.add_argument("--kind", choices=["spot", "imbalance"], required=True)
    fetch.add_argument("--out", required=True)
    fetch.set_defaults(handler=cmd_fetch_prices)

    scenario = commands.add_parser("make-scenario", help="write the synthetic contended scenario")
    scenario.add_argument("--out", required=True)
    scenario.add_argument("--seed", type=int, default=0)
    scenario.set_defaults(handler=cmd_make_scenario)
    return parser


def exit_code(error: BaseException) -> int:
    """2 for configuration errors, 3 for data and domain errors, 1 otherwise."""
    if isinstance(error, SimulationError) and error.__cause__ is not None:
        return exit_code(error.__cause__)
    if isinstance(error, ConfigError):
        return 2
    if isinstance(error, (DataError, DomainError)):
        return 3
    return 1


def main(argv=None) -> NoReturn:
    """Main entry point for the application.

    Command line usage:
        python main.py <command> [options]   (see --help)

    Raises:
        SystemExit: With 0 on success, 2 on config errors, 3 on data errors, 1 otherwise
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        logging.info(f"🚀 Running {args.command}")
        args.handler(args)
        logging.info(f"✅ {args.command} completed successfully!")

    except ConfigError as e:
        logging.error(f"❌ Configuration error: {e}")
        sys.exit(exit_code(e))

    except (DataError, DomainError) as e:
        logging.error(f"❌ Data error: {e}")
        if getattr(e, "details", None):
            logging.error(f"Affected: {e.details[:10]}")
        sys.exit(exit_code(e))

    except FetchError as e:
        logging.error(f"❌ Download error: {e}")
        if e.status_code:
            logging.error(f"Status code: {e.status_code}")
        sys.exit(exit_code(e))

    except PowerMarketError as e:
        logging.error(f"❌ Simulation error: {e}")
        sys.exit(exit_code(e))

    except KeyboardInterrupt:
        logging.warning("🛑 Process interrupted by user")
        sys.exit(1)

    except Exception as e:
        logging.error(f"❌ Unexpected error: {e}")
        sys.exit(1)

    sys.exit(0)


if __name__ == "__main__":
    main()
