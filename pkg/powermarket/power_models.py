import logging
import math
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from .base import ConfigError, DataError, DomainError, validate_fraction
from .types import PowerModelSpec, PowerTable, PState

"""
CPU power models evaluated from usage, plus the CSV loaders for P-state and
calibration tables.
"""

PSTATE_COLUMNS = ["index", "frequency_mhz", "voltage_v", "power_w"]
POWER_TABLE_COLUMNS = ["usage", "power_w"]


@validate_fraction("u")
def interpolate_power(table: PowerTable, u: float) -> float:
    """Piecewise-linear power between the two knots bracketing u.

    Args:
        table: (usage, watts) knots, strictly increasing in usage
        u: Usage fraction within the table's span

    Returns:
        Watts at u; knots are reproduced exactly

    Raises:
        DomainError: If u lies outside [first usage, last usage]
    """
    usages = np.fromiter((knot[0] for knot in table), dtype=float)
    powers = np.fromiter((knot[1] for knot in table), dtype=float)
    if u < usages[0] or u > usages[-1]:
        raise DomainError(f"u={u} lies outside the interpolation table span [{usages[0]}, {usages[-1]}]")

    upper = int(np.searchsorted(usages, u, side="left"))
    if usages[upper] == u:
        return float(powers[upper])
    u1, u2 = usages[upper - 1], usages[upper]
    p1, p2 = powers[upper - 1], powers[upper]
    return float(p1 + (p2 - p1) * (u - u1) / (u2 - u1))


@validate_fraction("u")
def eval_power(model: PowerModelSpec, u: float) -> float:
    """Evaluate a CPU power model at usage u.

    Args:
        model: The power model variant and its parameters
        u: CPU usage fraction in [0, 1]; never clamped

    Returns:
        Power draw in watts

    Raises:
        DomainError: If u is outside [0, 1] or outside an interpolation table's span
    """
    span = model.p_max - model.p_idle
    variant = model.variant

    if variant == "constant":
        return model.constant
    elif variant == "linear":
        return model.p_idle + span * u
    elif variant == "square":
        return model.p_idle + span * u ** 2
    elif variant == "cubic":
        return model.p_idle + span * u ** 3
    elif variant == "sqrt":
        return model.p_idle + span * math.sqrt(u)
    elif variant == "mse":
        return model.p_idle + span * (2 * u - u ** model.r)
    elif variant == "interpolation":
        return interpolate_power(model.table, u)
    elif variant == "asymptotic":
        return _asymptotic(model, u)
    elif variant == "asymptotic_dvfs":
        return _asymptotic(model, u ** 3)
    else:
        raise ConfigError(f"Unknown power model variant: {variant}")


def _asymptotic(model: PowerModelSpec, x: float) -> float:
    return model.p_idle + (model.p_max - model.p_idle) / 2 * (1 + x - math.exp(-x / model.a))


def idle_power(model: PowerModelSpec) -> float:
    """Power of an idle host under the model (u = 0)."""
    return eval_power(model, 0.0)


def _read_csv(path: Union[str, Path], columns) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"File not found: {path}")
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


def load_pstate_table(path: Union[str, Path]) -> Tuple[PState, ...]:
    """Load a P-state table from an `index,frequency_mhz,voltage_v,power_w` CSV.

    Raises:
        DataError: If the file is malformed, empty, or violates the ordering
            (frequency strictly decreasing and power non-increasing with index)
    """
    frame = _read_csv(path, PSTATE_COLUMNS)
    if frame.empty:
        raise DataError(f"P-state table {path} has no rows")

    try:
        frame = frame.astype({"index": int, "frequency_mhz": float, "voltage_v": float, "power_w": float})
    except ValueError as e:
        raise DataError(f"P-state table {path} has non-numeric values: {e}")
    frame = frame.sort_values("index", kind="mergesort").reset_index(drop=True)

    if not frame["frequency_mhz"].is_monotonic_decreasing or not frame["frequency_mhz"].is_unique:
        raise DataError(f"P-state frequencies in {path} must strictly decrease with index")
    if not frame["power_w"].is_monotonic_decreasing:
        raise DataError(f"P-state power in {path} must not increase with index")
    if (frame["frequency_mhz"] <= 0).any() or (frame["power_w"] < 0).any():
        raise DataError(f"P-state table {path} has non-positive frequencies or negative power")

    pstates = tuple(
        PState(index=int(index), frequency=float(frequency), voltage=float(voltage), power=float(power))
        for index, frequency, voltage, power in zip(frame["index"], frame["frequency_mhz"], frame["voltage_v"], frame["power_w"])
    )
    logging.debug(f"🔌 Loaded {len(pstates)} P-states from {path}")
    return pstates


def load_power_table(path: Union[str, Path]) -> PowerTable:
    """Load an interpolation table from a `usage,power_w` CSV.

    Raises:
        DataError: If the file is malformed or the usages do not strictly increase over [0, 1]
    """
    frame = _read_csv(path, POWER_TABLE_COLUMNS)
    try:
        frame = frame.astype(float)
    except ValueError as e:
        raise DataError(f"Power table {path} has non-numeric values: {e}")

    table = tuple((float(usage), float(power)) for usage, power in zip(frame["usage"], frame["power_w"]))
    try:
        PowerModelSpec(variant="interpolation", table=table)
    except ConfigError as e:
        raise DataError(f"Invalid power table {path}: {e}")
    return table
