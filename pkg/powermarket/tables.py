from typing import Dict, Tuple

from .base import ConfigError
from .types import TITANIUM_EFFICIENCY, Governor, PowerModelVariant

"""
Constant tables for the power-market simulator.
Contains the governor ladder, unit conversions, report column layouts and the
name lookups used by the config loader, and re-exports the default PSU curve.
"""

DEFAULT_LADDER: Tuple[Governor, ...] = ("performance", "ondemand", "conservative", "powersave")
DEFAULT_RUNG: Governor = "ondemand"

JOULES_PER_MWH = 3.6e9
JOULES_PER_KWH = 3.6e6
ISP_SECONDS = 900
ISPS_PER_HOUR = 4
ISPS_PER_DAY = 96

LEDGER_COLUMNS = ("t", "servers_w", "psu_loss_w", "pdu_loss_w", "ups_loss_w", "secondary_w", "total_w")
DECISION_COLUMNS = ("isp_start", "forecast_eur_mwh", "spot_eur_mwh", "branch", "rung_before", "rung_after", "oc_delta_pct")

GOVERNOR_NAMES: Dict[str, Governor] = {
    "performance": "performance",
    "powersave": "powersave",
    "ondemand": "ondemand",
    "conservative": "conservative",
}

POWER_MODEL_NAMES: Dict[str, PowerModelVariant] = {
    "constant": "constant",
    "linear": "linear",
    "square": "square",
    "cubic": "cubic",
    "sqrt": "sqrt",
    "mse": "mse",
    "interpolation": "interpolation",
    "asymptotic": "asymptotic",
    "asymptotic_dvfs": "asymptotic_dvfs",
    "asymptoticdvfs": "asymptotic_dvfs",
}


def governor_from_name(name: str) -> Governor:
    """
    Resolve a governor name from configuration.

    Args:
        name: Case-insensitive governor name (e.g. "Ondemand")

    Returns:
        The canonical governor literal

    Raises:
        ConfigError: If the name is not one of the four supported governors
    """
    key = name.strip().lower()
    if key not in GOVERNOR_NAMES:
        raise ConfigError(f"Unknown governor '{name}' (expected one of {sorted(GOVERNOR_NAMES)})")
    return GOVERNOR_NAMES[key]


def power_model_from_name(name: str) -> PowerModelVariant:
    """
    Resolve a power model variant name from configuration.

    Args:
        name: Case-insensitive variant name; "AsymptoticDvfs" and "asymptotic_dvfs" both resolve

    Returns:
        The canonical variant literal

    Raises:
        ConfigError: If the name is unknown
    """
    key = name.strip().lower().replace("-", "_")
    if key not in POWER_MODEL_NAMES:
        raise ConfigError(f"Unknown power model '{name}'")
    return POWER_MODEL_NAMES[key]
