import logging
import re
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import pearsonr

from .base import DataError, DomainError, validate_non_negative
from .tables import ISP_SECONDS, ISPS_PER_DAY, ISPS_PER_HOUR
from .types import OnDemandTariff, PriceBook, PriceSystem, ProcurementStrategy, Settlement, SettlementLine

"""
Price ingestion, day-ahead procurement, single-BRP imbalance settlement and
on-demand tariff accounting. Energy is in MWh, money in EUR.
"""

SPOT_COLUMNS = ["hour_start_iso8601", "price_eur_mwh"]
IMBALANCE_COLUMNS = ["isp_start_iso8601", "shortage_eur_mwh", "surplus_eur_mwh", "regulation_state"]

_OFFSET = re.compile(r"(Z|[+-]\d{2}:?\d{2})$")


def parse_utc(values: pd.Series, source: str) -> pd.DatetimeIndex:
    """Parse ISO-8601 timestamps carrying an explicit offset and convert them to UTC.

    Raises:
        DataError: If any timestamp has no offset or cannot be parsed
    """
    text = values.astype(str).str.strip()
    naive = text[~text.str.contains(_OFFSET)]
    if not naive.empty:
        raise DataError(
            f"{source}: timestamps without a UTC offset (e.g. '{naive.iloc[0]}')",
            details=naive.tolist(),
        )
    try:
        return pd.DatetimeIndex(pd.to_datetime(text, utc=True, format="ISO8601"))
    except (ValueError, TypeError) as e:
        raise DataError(f"{source}: unparseable timestamp: {e}")


def _read_prices(path: Union[str, Path], columns) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, encoding="utf-8", dtype={columns[0]: str})
    except FileNotFoundError:
        raise DataError(f"Price file not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot parse {path}: {e}")

    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise DataError(f"{path} is missing columns {missing}", details=missing)
    frame = frame[list(columns)]
    if frame.isna().any().any():
        raise DataError(f"{path} has empty cells")
    return frame


def _check_grid(index: pd.DatetimeIndex, step: str, source: str) -> None:
    off_grid = index[index != index.floor(step)]
    if len(off_grid):
        raise DataError(f"{source}: {len(off_grid)} timestamps are not aligned to {step}", details=list(off_grid))
    duplicated = index[index.duplicated()]
    if len(duplicated):
        raise DataError(f"{source}: duplicated timestamps", details=list(duplicated))


def ingest_spot(path: Union[str, Path]) -> pd.Series:
    """Read an `hour_start_iso8601,price_eur_mwh` CSV into an hourly UTC series.

    Raises:
        DataError: On missing offsets, misaligned or duplicated hours, or bad values
    """
    frame = _read_prices(path, SPOT_COLUMNS)
    index = parse_utc(frame["hour_start_iso8601"], str(path))
    _check_grid(index, "h", str(path))
    try:
        spot = pd.Series(frame["price_eur_mwh"].astype(float).to_numpy(), index=index, name="spot")
    except ValueError as e:
        raise DataError(f"{path}: non-numeric price: {e}")
    logging.info(f"💶 Loaded {len(spot)} spot prices from {path}")
    return spot.sort_index()


def ingest_imbalance(path: Union[str, Path]) -> pd.DataFrame:
    """Read an `isp_start_iso8601,shortage_eur_mwh,surplus_eur_mwh,regulation_state` CSV.

    Returns:
        Frame indexed by UTC ISP start with columns shortage, surplus, regulation_state

    Raises:
        DataError: On missing offsets, ISPs off the 15-minute grid, or bad values
    """
    frame = _read_prices(path, IMBALANCE_COLUMNS)
    index = parse_utc(frame["isp_start_iso8601"], str(path))
    _check_grid(index, "15min", str(path))
    try:
        imbalance = pd.DataFrame(
            {
                "shortage": frame["shortage_eur_mwh"].astype(float).to_numpy(),
                "surplus": frame["surplus_eur_mwh"].astype(float).to_numpy(),
                "regulation_state": frame["regulation_state"].astype(int).to_numpy(),
            },
            index=index,
        )
    except ValueError as e:
        raise DataError(f"{path}: non-numeric imbalance value: {e}")
    logging.info(f"⚖️ Loaded {len(imbalance)} imbalance prices from {path}")
    return imbalance.sort_index()


def validate_alignment(book: PriceBook) -> None:
    """Check that every ISP's hour has a spot price; warn about incomplete ISP days.

    Raises:
        DataError: Listing the ISP hours without a spot price
    """
    hours = book.imbalance.index.floor("h")
    gaps = sorted(set(hours[~hours.isin(book.spot.index)]))
    if gaps:
        raise DataError(f"{len(gaps)} ISP hours have no spot price", details=gaps)

    per_day = pd.Series(1, index=book.imbalance.index).groupby(book.imbalance.index.floor("D")).sum()
    incomplete = per_day[per_day != ISPS_PER_DAY]
    if not incomplete.empty:
        logging.warning(f"⚠️ {len(incomplete)} day(s) do not have {ISPS_PER_DAY} ISPs")


def load_price_book(spot_path: Union[str, Path], imbalance_path: Union[str, Path]) -> PriceBook:
    book = PriceBook(spot=ingest_spot(spot_path), imbalance=ingest_imbalance(imbalance_path), isp_length=ISP_SECONDS)
    validate_alignment(book)
    return book


def spot_per_isp(book: PriceBook, isp_index: pd.DatetimeIndex) -> np.ndarray:
    """Spot price of each ISP's hour.

    Raises:
        DataError: Listing ISPs whose hour has no spot price
    """
    hours = isp_index.floor("h")
    missing = isp_index[~hours.isin(book.spot.index)]
    if len(missing):
        raise DataError(f"{len(missing)} ISPs have no spot price", details=list(missing))
    return book.spot.reindex(hours).to_numpy(dtype=float)


def schedule_quantity(
    forecast: Sequence[float],
    strategy: ProcurementStrategy,
    spot: Optional[Sequence[float]] = None,
    shortage: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Hourly day-ahead quantities for one day.

    QuantileScalar buys a flat Q_q(forecast) * s every hour, BaseLoad buys the
    day's minimum hour, and PriceAware buys the full forecast hour whenever its
    spot price is below the hour's mean shortage price and the base load otherwise.

    Args:
        forecast: The day's hourly load forecast in MWh
        strategy: Procurement strategy
        spot: Hourly spot prices (PriceAware only)
        shortage: Hourly mean shortage prices (PriceAware only)

    Returns:
        MWh to schedule per hour

    Raises:
        DomainError: If the forecast is empty or negative, or PriceAware lacks prices
    """
    loads = np.asarray(forecast, dtype=float)
    if loads.size == 0:
        raise DomainError("cannot schedule an empty forecast")
    if (loads < 0).any():
        raise DomainError("forecast must be non-negative")

    base = float(loads.min())
    if strategy.kind == "base_load":
        return np.full(loads.shape, base)
    if strategy.kind == "quantile_scalar":
        return np.full(loads.shape, float(np.quantile(loads, strategy.q)) * strategy.s)

    if spot is None or shortage is None:
        raise DomainError("price-aware procurement needs spot and shortage prices")
    spot = np.asarray(spot, dtype=float)
    shortage = np.asarray(shortage, dtype=float)
    if spot.shape != loads.shape or shortage.shape != loads.shape:
        raise DomainError("price-aware prices must align with the forecast hours")
    return np.where(spot < shortage, loads, base)


def schedule_day_ahead(hourly_forecast: pd.Series, strategy: ProcurementStrategy, book: Optional[PriceBook] = None) -> pd.Series:
    """Apply schedule_quantity day by day (UTC) to an hourly forecast series."""
    if hourly_forecast.empty:
        return hourly_forecast.astype(float)

    mean_shortage = None
    if strategy.kind == "price_aware":
        if book is None:
            raise DomainError("price-aware procurement needs a price book")
        mean_shortage = book.imbalance["shortage"].groupby(book.imbalance.index.floor("h")).mean()

    parts = []
    for _, day in hourly_forecast.groupby(hourly_forecast.index.floor("D")):
        spot = shortage = None
        if mean_shortage is not None:
            missing = day.index[~day.index.isin(book.spot.index) | ~day.index.isin(mean_shortage.index)]
            if len(missing):
                raise DataError(f"{len(missing)} hours lack prices for price-aware procurement", details=list(missing))
            spot = book.spot.reindex(day.index).to_numpy()
            shortage = mean_shortage.reindex(day.index).to_numpy()
        parts.append(pd.Series(schedule_quantity(day.to_numpy(), strategy, spot, shortage), index=day.index))
    return pd.concat(parts).rename("scheduled_mwh")


def hourly_to_isp(hourly: pd.Series) -> pd.Series:
    """Spread each hourly quantity evenly over its four ISPs."""
    offsets = [pd.Timedelta(seconds=ISP_SECONDS * k) for k in range(ISPS_PER_HOUR)]
    index = pd.DatetimeIndex([hour + offset for hour in hourly.index for offset in offsets])
    values = np.repeat(hourly.to_numpy(dtype=float) / ISPS_PER_HOUR, ISPS_PER_HOUR)
    return pd.Series(values, index=index, name="scheduled_mwh")


def settle(book: PriceBook, system: PriceSystem, scheduled: pd.Series, delivered: pd.Series) -> Settlement:
    """Settle one BRP's day-ahead purchase and imbalance per ISP.

    Shortages pay the shortage price. Surpluses are refunded at the surplus
    price under the one-price system and at the spot price under the two-price
    system. Negative prices keep their sign.

    Args:
        book: Spot and imbalance prices
        system: "one" or "two"
        scheduled: MWh scheduled per ISP start (UTC)
        delivered: MWh delivered per ISP start (UTC), same index as scheduled

    Returns:
        Settlement with per-ISP lines

    Raises:
        DomainError: If the two series are not aligned or the system is unknown
        DataError: Listing ISPs without prices
    """
    if system not in ("one", "two"):
        raise DomainError(f"unknown price system: {system}")
    if not scheduled.index.equals(delivered.index):
        raise DomainError("scheduled and delivered energy must cover the same ISPs")

    isps = pd.DatetimeIndex(scheduled.index)
    gaps = isps[~isps.isin(book.imbalance.index)]
    if len(gaps):
        raise DataError(f"{len(gaps)} ISPs have no imbalance price", details=list(gaps))
    spot = spot_per_isp(book, isps)
    prices = book.imbalance.reindex(isps)

    q_s = scheduled.to_numpy(dtype=float)
    q_a = delivered.to_numpy(dtype=float)
    shortage = np.maximum(0.0, q_a - q_s)
    surplus = np.maximum(0.0, q_s - q_a)
    refund_price = prices["surplus"].to_numpy() if system == "one" else spot

    day_ahead = q_s * spot
    shortage_cost = shortage * prices["shortage"].to_numpy()
    refund = surplus * refund_price
    cost = day_ahead + shortage_cost - refund

    lines = tuple(
        SettlementLine(isp_start=isp, scheduled=s, delivered=a, shortage=short, surplus=sur, cost=c)
        for isp, s, a, short, sur, c in zip(isps, q_s, q_a, shortage, surplus, cost)
    )
    return Settlement(
        system=system,
        day_ahead_cost=float(day_ahead.sum()),
        shortage_cost=float(shortage_cost.sum()),
        surplus_refund=float(refund.sum()),
        lines=lines,
    )


@validate_non_negative("energy")
def ondemand_cost(energy: float, tariff: OnDemandTariff) -> float:
    """Cost of buying energy (MWh) at a fixed on-demand tariff."""
    return energy * tariff.price


def balance_gain(q_a: float, q_s: float, zeta: float) -> float:
    """Value of the deviation between actual and scheduled energy at price zeta."""
    return (q_a - q_s) * zeta


def market_comparison(book: PriceBook, delivered: pd.Series, tariffs: Sequence[OnDemandTariff]) -> Dict[str, float]:
    """Cost of the same delivered energy bought entirely in each market.

    Returns:
        Costs keyed "day_ahead" (all at spot), "balancing" (all as shortage) and
        "on_demand_<label>" per tariff
    """
    isps = pd.DatetimeIndex(delivered.index)
    gaps = isps[~isps.isin(book.imbalance.index)]
    if len(gaps):
        raise DataError(f"{len(gaps)} ISPs have no imbalance price", details=list(gaps))
    energy = delivered.to_numpy(dtype=float)
    costs = {
        "day_ahead": float((energy * spot_per_isp(book, isps)).sum()),
        "balancing": float((energy * book.imbalance["shortage"].reindex(isps).to_numpy()).sum()),
    }
    total = float(energy.sum())
    for tariff in tariffs:
        costs[f"on_demand_{tariff.label}"] = ondemand_cost(total, tariff)
    return costs


def _pearson(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    if len(x) < 3 or np.std(x) == 0 or np.std(y) == 0:
        return float("nan"), float("nan")
    r, p = pearsonr(x, y)
    return float(r), float(p)


def price_correlation(book: PriceBook) -> Dict[str, Tuple[float, float]]:
    """Pearson (r, p-value) between spot, shortage and surplus prices per ISP."""
    isps = pd.DatetimeIndex(book.imbalance.index)
    spot = spot_per_isp(book, isps)
    shortage = book.imbalance["shortage"].to_numpy(dtype=float)
    surplus = book.imbalance["surplus"].to_numpy(dtype=float)
    return {
        "spot_shortage": _pearson(spot, shortage),
        "spot_surplus": _pearson(spot, surplus),
        "shortage_surplus": _pearson(shortage, surplus),
    }
