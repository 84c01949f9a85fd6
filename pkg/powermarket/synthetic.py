import logging
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from .forecast import INFERENCE_COLUMNS
from .machine import TRACE_COLUMNS
from .market import IMBALANCE_COLUMNS, SPOT_COLUMNS
from .power_models import PSTATE_COLUMNS
from .tables import ISP_SECONDS

"""
Deterministic synthetic inputs: a contended VM trace, a P-state table, a
price history with ML inferences, and a runnable scenario tying them together.
"""

START_EPOCH = 1614600000  # 2021-03-01 12:00 UTC
TRACE_HOURS = 48
TRACE_INTERVAL = 300
VM_COUNT = 16
VM_PEAK_MHZ = 6000.0
VM_MEMORY_MB = 2048.0

# (frequency MHz, voltage V, busy package power W)
PSTATES = (
    (3000.0, 1.20, 350.0),
    (2700.0, 1.14, 292.1),
    (2400.0, 1.08, 243.1),
    (2100.0, 1.02, 202.5),
    (1800.0, 0.96, 169.7),
    (1500.0, 0.88, 144.2),
    (1200.0, 0.80, 125.3),
)


def _iso(index: pd.DatetimeIndex) -> list:
    return [stamp.isoformat() for stamp in index]


def demand_profile(timestamps: np.ndarray) -> np.ndarray:
    """Diurnal aggregate demand fraction: 0.95 at noon UTC, 0.15 through the night."""
    hours = (timestamps % 86400) / 3600.0
    return 0.15 + 0.8 * np.clip(np.cos(2 * np.pi * (hours - 12.0) / 24.0), 0.0, None)


def contended_trace(
    seed: int = 0,
    start: int = START_EPOCH,
    hours: int = TRACE_HOURS,
    interval: int = TRACE_INTERVAL,
    vms: int = VM_COUNT,
) -> pd.DataFrame:
    """Trace records of `vms` equally sized VMs following the diurnal profile.

    Each VM's demand carries up to 3% seeded jitter, so the aggregate peak
    stays below 95% * 1.03 of vms * VM_PEAK_MHZ.
    """
    generator = np.random.Generator(np.random.PCG64(seed))
    timestamps = start + interval * np.arange(hours * 3600 // interval)
    base = demand_profile(timestamps)
    jitter = generator.uniform(-0.03, 0.03, size=(len(timestamps), vms))
    cpu = np.round(VM_PEAK_MHZ * base[:, None] * (1.0 + jitter), 3)

    vm_ids = [f"vm{number:02d}" for number in range(vms)]
    return pd.DataFrame(
        {
            "timestamp": np.repeat(timestamps, vms),
            "vm_id": np.tile(vm_ids, len(timestamps)),
            "cpu_demand_mhz": cpu.ravel(),
            "memory_mb": VM_MEMORY_MB,
        },
        columns=TRACE_COLUMNS,
    )


def pstate_table() -> pd.DataFrame:
    return pd.DataFrame(
        [(index, frequency, voltage, power) for index, (frequency, voltage, power) in enumerate(PSTATES)],
        columns=PSTATE_COLUMNS,
    )


def price_history(
    start: Union[str, pd.Timestamp],
    days: int,
    seed: int = 0,
    shortage_ratio: float = 1.5,
    negative_hours: Sequence[int] = (),
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Hourly spot and per-ISP imbalance prices over whole UTC days.

    Spot follows a daily cycle around 50 EUR/MWh. The shortage price is
    `shortage_ratio` times the hour's spot price with up to 5% jitter, so a
    ratio above 1.06 keeps every shortage price above spot and a ratio in
    (0, 0.94) keeps it strictly between zero and spot.

    ISPs in the UTC hours listed in `negative_hours` get the shortage price
    negated, which makes consuming profitable there.

    Returns:
        (spot frame, imbalance frame) with the ingest column names
    """
    generator = np.random.Generator(np.random.PCG64(seed))
    first = pd.Timestamp(start)
    first = (first.tz_localize("UTC") if first.tzinfo is None else first.tz_convert("UTC")).floor("D")
    hours = pd.date_range(first, periods=days * 24, freq="h")
    spot = 50.0 + 20.0 * np.sin(2 * np.pi * (hours.hour - 6) / 24.0) + generator.normal(0.0, 3.0, size=len(hours))
    spot = np.round(np.clip(spot, 5.0, None), 2)

    isps = pd.date_range(first, periods=days * 96, freq="15min")
    spot_per_isp = np.repeat(spot, 4)
    shortage = np.round(shortage_ratio * spot_per_isp * (1.0 + generator.uniform(-0.05, 0.05, size=len(isps))), 2)
    shortage = np.where(np.isin(isps.hour, list(negative_hours)), -shortage, shortage)
    surplus = np.round(shortage - generator.uniform(0.0, 5.0, size=len(isps)), 2)
    regulation = generator.choice([-1, 0, 1, 2], size=len(isps))

    spot_frame = pd.DataFrame({SPOT_COLUMNS[0]: _iso(hours), SPOT_COLUMNS[1]: spot})
    imbalance_frame = pd.DataFrame(
        {
            IMBALANCE_COLUMNS[0]: _iso(isps),
            IMBALANCE_COLUMNS[1]: shortage,
            IMBALANCE_COLUMNS[2]: surplus,
            IMBALANCE_COLUMNS[3]: regulation,
        }
    )
    return spot_frame, imbalance_frame


def inferences(imbalance: pd.DataFrame, first: pd.Timestamp, last: pd.Timestamp, seed: int = 0, noise: float = 2.0) -> pd.DataFrame:
    """Minute-by-minute predictions for every ISP in [first, last], made during the preceding ISP.

    Each value is the actual shortage price plus N(0, noise); the eighth
    minute of every ISP has no prediction.
    """
    generator = np.random.Generator(np.random.PCG64(seed))
    actual = pd.Series(
        imbalance[IMBALANCE_COLUMNS[1]].to_numpy(dtype=float),
        index=pd.to_datetime(imbalance[IMBALANCE_COLUMNS[0]], utc=True, format="ISO8601"),
    )
    rows = []
    for target in pd.date_range(first, last, freq="15min"):
        for minute in range(ISP_SECONDS // 60):
            if minute == 7:
                continue
            predicted_at = target - pd.Timedelta(minutes=15 - minute)
            rows.append((predicted_at.isoformat(), target.isoformat(), round(actual[target] + generator.normal(0.0, noise), 3)))
    return pd.DataFrame(rows, columns=INFERENCE_COLUMNS)


def scenario_document(seed: int = 0) -> Dict[str, Dict[str, Any]]:
    """Sections of the synthetic contended scenario: 48 h at 5-minute ticks on 4 hosts."""
    return {
        "run": {"seed": seed, "output_dir": "out"},
        "trace": {"path": "trace.csv", "vm_cap_mhz": 8000},
        "machine": {"core_count": 8, "max_frequency_mhz": 3000, "memory_unit_size_mb": 4096, "pstate_table": "pstates.csv"},
        "power_model": {"variant": "linear", "p_idle_w": 100, "p_max_w": 350, "source": "pstate"},
        "psu": {"rated_output_w": 870},
        "topology": {"hosts_per_rack_pdu": 2, "pdus_per_ups": 2, "pue": 1.6},
        "rack_pdu": {"nameplate_loss": 0.03, "tare_loss": 0.01, "rated_power_w": 1000},
        "ups": {"nameplate_loss": 0.08, "tare_loss": 0.03, "rated_power_w": 3000},
        "dvfs": {"governor": "performance", "up_threshold_pct": 80, "step_fraction": 0.05},
        "scheduler": {"enabled": False, "damping_factor": 12},
        "forecast": {"inference_path": "inferences.csv", "mode": "average", "aa_mode": "literal"},
        "market": {
            "spot_path": "spot.csv",
            "imbalance_path": "imbalance.csv",
            "price_system": "two",
            "procurement": "quantile_scalar",
            "quantile_q": 0.9,
            "scalar_s": 1.0,
        },
        "tariffs": {"low_eur_mwh": 60, "mid_eur_mwh": 120, "high_eur_mwh": 240},
    }


def write_scenario(out_dir: Union[str, Path], seed: int = 0) -> Path:
    """Write a complete runnable scenario into out_dir.

    Files: trace.csv, pstates.csv, spot.csv, imbalance.csv, inferences.csv and
    scenario.yaml. Prices cover whole UTC days around the trace window, with
    every shortage price above spot.

    Returns:
        Path of scenario.yaml
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    trace = contended_trace(seed)
    trace.to_csv(out / "trace.csv", index=False)
    pstate_table().to_csv(out / "pstates.csv", index=False)

    first = pd.Timestamp(START_EPOCH, unit="s", tz="UTC")
    last = pd.Timestamp(int(trace["timestamp"].max()), unit="s", tz="UTC").floor("15min")
    days = (last.floor("D") - first.floor("D")).days + 1
    spot, imbalance = price_history(first, days, seed)
    spot.to_csv(out / "spot.csv", index=False)
    imbalance.to_csv(out / "imbalance.csv", index=False)
    inferences(imbalance, first, last, seed).to_csv(out / "inferences.csv", index=False)

    path = out / "scenario.yaml"
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(scenario_document(seed), f, sort_keys=False)
    logging.info(f"🧪 Synthetic scenario written to {path}")
    return path
