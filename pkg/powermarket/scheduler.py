import logging
import math
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd

from .base import DomainError
from .types import DecisionLogEntry, Governor, SchedulerConfig, SchedulerState


class SweetSpot(NamedTuple):
    factor: float
    flag: str  # "intersection", "degenerate" or "no_intersection"


def new_state(config: SchedulerConfig) -> SchedulerState:
    """Scheduler state starting on the default rung."""
    return SchedulerState(rung=config.ladder.index(config.default_rung))


def current_governor(state: SchedulerState, config: SchedulerConfig) -> Governor:
    return config.ladder[state.rung]


def decide(
    pf_next: Optional[float],
    ps_hour: float,
    state: SchedulerState,
    config: SchedulerConfig,
    isp_start=None,
    oc_delta: float = 0.0,
) -> Governor:
    """Pick the governor for the next ISP from the forecast shortage price.

    A negative forecast means consuming is paid for, so the scheduler goes to
    the most performant rung. A forecast above the hour's spot price steps one
    rung down. A tie keeps the current rung and anything else returns to the
    default rung. A missing forecast keeps the current rung.

    Args:
        pf_next: Forecast shortage price for the next ISP (EUR/MWh), or None
        ps_hour: Spot price of the ISP's hour (EUR/MWh)
        state: Scheduler state, updated in place
        config: Ladder, default rung and branch actions
        isp_start: ISP start recorded in the decision log
        oc_delta: Over-commission growth recorded in the decision log

    Returns:
        The governor to run during the next ISP
    """
    before = state.rung
    bottom = len(config.ladder) - 1

    if pf_next is None or math.isnan(pf_next):
        branch, rung = "no_forecast", before
    elif pf_next < 0:
        branch = "negative"
        rung = {"top": 0, "up": max(0, before - 1), "hold": before}[config.on_negative]
    elif pf_next > ps_hour:
        branch = "above_spot"
        rung = {"down": min(bottom, before + 1), "bottom": bottom, "hold": before}[config.on_above_spot]
    elif pf_next == ps_hour:
        branch, rung = "tie", before
    else:
        branch = "otherwise"
        rung = config.ladder.index(config.default_rung) if config.otherwise == "default" else before

    state.rung = rung
    state.decisions.append(
        DecisionLogEntry(
            isp_start=isp_start,
            forecast_eur_mwh=float("nan") if pf_next is None else float(pf_next),
            spot_eur_mwh=float(ps_hour),
            branch=branch,
            rung_before=config.ladder[before],
            rung_after=config.ladder[rung],
            oc_delta_pct=float(oc_delta),
        )
    )
    return config.ladder[rung]


def damp(state: SchedulerState, config: SchedulerConfig, oc_delta: float) -> Governor:
    """Ascend one rung when over-commission grew by more than the damping factor.

    Args:
        state: Scheduler state; its reference is moved up to the current level on ascent
        config: Carries the damping factor (float("inf") disables the guard)
        oc_delta: Over-commission growth in percentage points since the last amelioration

    Returns:
        The governor after damping

    Raises:
        DomainError: If oc_delta is negative
    """
    if oc_delta < 0:
        raise DomainError(f"oc_delta must be non-negative, got {oc_delta}")
    if oc_delta > config.damping_factor and state.rung > 0:
        state.rung -= 1
        state.oc_reference += oc_delta
        logging.debug(f"🧯 Over-commission grew {oc_delta:.2f} pp, ascending to {config.ladder[state.rung]}")
    return config.ladder[state.rung]


def _normalize(values: np.ndarray) -> np.ndarray:
    span = values.max() - values.min()
    if span == 0:
        return np.zeros_like(values)
    return (values - values.min()) / span


def sweet_spot(rows: pd.DataFrame, energy_column: str = "energy_kwh", oc_column: str = "overcommit_pct") -> SweetSpot:
    """Damping factor where the energy and over-commission trade-off curves cross.

    Both series are min-max normalised and fitted with least-squares cubics
    over the swept range; the smallest real root of their difference inside the
    range is returned. Without a crossing the swept factor closest to one is
    returned with the "no_intersection" flag.

    Args:
        rows: Sweep rows with a "factor" column and the two metric columns

    Raises:
        DomainError: With fewer than 5 rows or fewer than two distinct factors
    """
    if len(rows) < 5:
        raise DomainError(f"sweet spot needs at least 5 sweep rows, got {len(rows)}")
    frame = rows.sort_values("factor", kind="mergesort")
    factors = frame["factor"].to_numpy(dtype=float)
    low, high = factors.min(), factors.max()
    if high == low:
        raise DomainError("sweet spot needs at least two distinct damping factors")

    t = (factors - low) / (high - low)
    energy_fit = np.polyfit(t, _normalize(frame[energy_column].to_numpy(dtype=float)), 3)
    oc_fit = np.polyfit(t, _normalize(frame[oc_column].to_numpy(dtype=float)), 3)
    difference = energy_fit - oc_fit

    scale = max(1.0, float(np.abs(energy_fit).max()), float(np.abs(oc_fit).max()))
    difference[np.abs(difference) < 1e-12 * scale] = 0.0
    if not difference.any():
        return SweetSpot(factor=float(low), flag="degenerate")

    roots = np.roots(np.trim_zeros(difference, "f"))
    real = roots[np.abs(roots.imag) <= 1e-9].real
    inside = real[(real >= -1e-9) & (real <= 1 + 1e-9)]
    if inside.size:
        crossing = float(np.clip(inside.min(), 0.0, 1.0))
        return SweetSpot(factor=float(low + crossing * (high - low)), flag="intersection")

    closest = int(np.argmin(np.abs(np.polyval(difference, t))))
    logging.info("📉 Energy and over-commission fits do not cross in the swept range")
    return SweetSpot(factor=float(factors[closest]), flag="no_intersection")
