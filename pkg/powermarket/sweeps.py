import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .base import ConfigError, DomainError, PowerMarketError
from .engine import Simulator
from .forecast import aa_sweep, split_seeds, synth_forecast
from .machine import load_trace
from .market import hourly_to_isp, load_price_book, schedule_day_ahead, settle, spot_per_isp
from .types import PriceBook, ProcurementStrategy, ScenarioConfig, Trace

"""
Parameter sweeps over full simulations (damping factor, synthetic forecast
noise) and over procurement strategies of a finished run.
"""


def parse_range(text: str) -> List[float]:
    """Expand "a:b:step" into a grid from a to b; b is included when it lies on the grid.

    A single number yields a one-element grid.

    Raises:
        ConfigError: If the text is malformed or the step is not positive
    """
    parts = text.split(":")
    try:
        values = [float(part) for part in parts]
    except ValueError:
        raise ConfigError(f"Invalid range '{text}' (expected a:b:step)")
    if len(values) == 1:
        return values
    if len(values) != 3:
        raise ConfigError(f"Invalid range '{text}' (expected a:b:step)")
    start, stop, step = values
    if step <= 0 or stop < start:
        raise ConfigError(f"Invalid range '{text}': need step > 0 and b >= a")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def _inputs(config: ScenarioConfig) -> Tuple[Trace, Optional[PriceBook]]:
    trace = load_trace(config.trace_path, config.trace_interval)
    book = load_price_book(config.spot_path, config.imbalance_path) if config.spot_path and config.imbalance_path else None
    return trace, book


def _run_case(case) -> Dict[str, float]:
    """Run one simulation; errors become a row with the message instead of stopping the sweep."""
    label, config, trace, book, forecast = case
    try:
        totals = Simulator(config, trace=trace, book=book, forecast=forecast).run().totals
        return {
            **label,
            "energy_kwh": totals["energy_kwh"],
            "overcommit_pct": totals["overcommit_pct"],
            "cost_total_eur": totals["cost_total_eur"],
            "error": "",
        }
    except PowerMarketError as e:
        logging.error(f"❌ Sweep case {label} failed: {e}")
        return {**label, "energy_kwh": np.nan, "overcommit_pct": np.nan, "cost_total_eur": np.nan, "error": str(e)}


def _run_cases(cases: Sequence, workers: int) -> List[Dict[str, float]]:
    if workers <= 1:
        return [_run_case(case) for case in cases]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_case, cases))


def sweep_damping(
    config: ScenarioConfig,
    factors: Sequence[float],
    workers: int = 1,
    trace: Optional[Trace] = None,
    book: Optional[PriceBook] = None,
    forecast: Optional[pd.Series] = None,
) -> pd.DataFrame:
    """One full scheduler run per damping factor.

    Args:
        config: Scenario with the scheduler enabled
        factors: Damping factors, ascending
        workers: Process count; 1 runs in-process
        trace, book, forecast: Preloaded inputs shared by every run

    Returns:
        Frame with factor, energy_kwh, overcommit_pct, cost_total_eur and error
    """
    if config.scheduler is None:
        raise ConfigError("sweep-damping needs scheduler.enabled: true")
    if list(factors) != sorted(factors):
        raise DomainError("damping factors must be sorted ascending")
    if trace is None:
        trace, loaded_book = _inputs(config)
        book = book if book is not None else loaded_book

    cases = [
        ({"factor": float(factor)}, replace(config, scheduler=replace(config.scheduler, damping_factor=float(factor))), trace, book, forecast)
        for factor in factors
    ]
    logging.info(f"🧪 Sweeping {len(cases)} damping factors")
    return pd.DataFrame(_run_cases(cases, workers), columns=["factor", "energy_kwh", "overcommit_pct", "cost_total_eur", "error"])


def sweep_sigma(
    config: ScenarioConfig,
    sigmas: Sequence[float],
    seeds: int,
    workers: int = 1,
    trace: Optional[Trace] = None,
    book: Optional[PriceBook] = None,
) -> pd.DataFrame:
    """Scheduler runs driven by synthetic predictors of increasing noise.

    Each sigma runs `seeds` simulations with sub-seeds from split_seeds(config.seed, seeds).

    Returns:
        Per sigma: mean and std of energy, over-commission and total cost
    """
    if config.scheduler is None:
        raise ConfigError("sweep-sigma needs scheduler.enabled: true")
    if trace is None:
        trace, loaded_book = _inputs(config)
        book = book if book is not None else loaded_book
    if book is None:
        raise ConfigError("sweep-sigma needs spot and imbalance price files")

    shortage = book.imbalance["shortage"]
    cases = [
        ({"sigma": float(sigma), "seed": seed}, config, trace, book, synth_forecast(shortage, sigma, seed))
        for sigma in sigmas
        for seed in split_seeds(config.seed, seeds)
    ]
    logging.info(f"🧪 Sweeping {len(sigmas)} sigmas x {seeds} seeds")
    runs = pd.DataFrame(_run_cases(cases, workers))
    grouped = runs.groupby("sigma", sort=True)[["energy_kwh", "overcommit_pct", "cost_total_eur"]]
    summary = grouped.agg(["mean", "std"])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    return summary.reset_index()


def aa_eval(book: PriceBook, sigmas: Sequence[float], seeds: int, base_seed: int = 0, mode: str = "literal") -> pd.DataFrame:
    """Agreement accuracy of synthetic predictors against a price history."""
    isps = pd.DatetimeIndex(book.imbalance.index)
    if len(isps) == 0:
        raise DomainError("the price history has no ISPs")
    return aa_sweep(book.imbalance["shortage"].to_numpy(), spot_per_isp(book, isps), sigmas, seeds, base_seed, mode)


def sweep_procurement(
    delivered: pd.Series,
    book: PriceBook,
    qs: Sequence[float],
    ss: Sequence[float],
) -> pd.DataFrame:
    """Settle a run's delivered energy under every (q, s) schedule and both price systems.

    The base-load and price-aware strategies are added as extra rows.

    Returns:
        Rows of strategy, q, s, system, day_ahead_eur, imbalance_eur, total_eur
    """
    hourly = delivered.groupby(delivered.index.floor("h")).sum()
    strategies = [ProcurementStrategy(kind="quantile_scalar", q=q, s=s) for q in qs for s in ss]
    strategies += [ProcurementStrategy(kind="base_load"), ProcurementStrategy(kind="price_aware")]

    rows = []
    for strategy in strategies:
        scheduled = hourly_to_isp(schedule_day_ahead(hourly, strategy, book))
        index = delivered.index.union(scheduled.index)
        for system in ("one", "two"):
            result = settle(book, system, scheduled.reindex(index, fill_value=0.0), delivered.reindex(index, fill_value=0.0))
            rows.append(
                {
                    "strategy": strategy.kind,
                    "q": strategy.q if strategy.kind == "quantile_scalar" else np.nan,
                    "s": strategy.s if strategy.kind == "quantile_scalar" else np.nan,
                    "system": system,
                    "day_ahead_eur": result.day_ahead_cost,
                    "imbalance_eur": result.imbalance_cost,
                    "total_eur": result.total,
                }
            )
    logging.info(f"🧪 Settled {len(strategies)} procurement strategies")
    return pd.DataFrame(rows)
