import json
import logging
from pathlib import Path
from typing import Tuple, Union

import pandas as pd

from .base import DataError
from .engine import decompose_loads
from .types import RunReport

"""
Run report I/O: plain CSV per table plus a JSON summary, and the tidy
long-format series behind each figure.
"""

SUMMARY_FILE = "summary.json"
TABLES = ("ledger", "fleet", "isp", "settlement", "decisions")
TIME_COLUMNS = {"isp": "isp_start", "settlement": "isp_start", "decisions": "isp_start"}
FIGURES = ("loads", "costs", "damping", "aa", "dr")


def write_report(report: RunReport, out_dir: Union[str, Path]) -> Path:
    """Write every report table as CSV and the totals and metrics as sorted JSON.

    Returns:
        The output directory
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in TABLES:
        getattr(report, name).to_csv(out / f"{name}.csv", index=False)

    summary = {"totals": report.totals, "metrics": report.metrics, "base_kw": report.base_kw, "n_hosts": report.n_hosts}
    with open(out / SUMMARY_FILE, "w", encoding="utf-8") as handle:
        json.dump(summary, handle, sort_keys=True, indent=2)
        handle.write("\n")
    logging.info(f"📝 Report written to {out}")
    return out


def read_report(report_dir: Union[str, Path]) -> RunReport:
    """Read a report written by write_report.

    Raises:
        DataError: If a report file is missing or unreadable
    """
    directory = Path(report_dir)
    tables = {}
    for name in TABLES:
        path = directory / f"{name}.csv"
        if not path.is_file():
            raise DataError(f"Report file missing: {path}")
        try:
            frame = pd.read_csv(path)
        except pd.errors.EmptyDataError:
            frame = pd.DataFrame()
        column = TIME_COLUMNS.get(name)
        if column and column in frame.columns and len(frame):
            frame[column] = pd.to_datetime(frame[column], utc=True)
        tables[name] = frame

    summary_path = directory / SUMMARY_FILE
    try:
        with open(summary_path, encoding="utf-8") as handle:
            summary = json.load(handle)
    except FileNotFoundError:
        raise DataError(f"Report file missing: {summary_path}")
    except json.JSONDecodeError as e:
        raise DataError(f"Cannot parse {summary_path}: {e}")

    return RunReport(
        totals=summary["totals"],
        metrics=summary["metrics"],
        base_kw=summary["base_kw"],
        n_hosts=summary["n_hosts"],
        **tables,
    )


def isp_energy(report: RunReport) -> Tuple[pd.Series, pd.Series]:
    """(scheduled, delivered) MWh per ISP start from a report's ISP table."""
    isp = report.isp
    if isp.empty:
        raise DataError("Report has no ISP table; was it run with price files?")
    index = pd.DatetimeIndex(isp["isp_start"])
    return (
        pd.Series(isp["scheduled_mwh"].to_numpy(dtype=float), index=index),
        pd.Series(isp["delivered_mwh"].to_numpy(dtype=float), index=index),
    )


def _long(x, series: str, values) -> pd.DataFrame:
    return pd.DataFrame({"x": list(x), "series": series, "value": list(values)})


def plot_data(report_dir: Union[str, Path], figure: str) -> pd.DataFrame:
    """Tidy (x, series, value) rows for one figure.

    loads, costs and dr read a run report; damping and aa read the CSV written
    by the matching sweep into the same directory.

    Raises:
        DataError: If the figure is unknown or its source files are missing
    """
    directory = Path(report_dir)
    if figure == "damping":
        return _sweep_long(directory / "damping.csv", "factor", ("energy_kwh", "overcommit_pct"))
    if figure == "aa":
        return _sweep_long(directory / "aa.csv", "sigma", ("mean_aa", "std_aa"))
    if figure not in FIGURES:
        raise DataError(f"Unknown figure '{figure}' (expected one of {', '.join(FIGURES)})")

    report = read_report(directory)
    if figure == "loads":
        t = report.fleet["t"]
        base_kw, peak_kw = decompose_loads(report)
        return pd.concat(
            [
                _long(t, "base_kw", [base_kw] * len(t)),
                _long(t, "peak_kw", peak_kw.to_numpy()),
                _long(t, "it_kw", report.ledger["servers_w"] / 1000.0),
                _long(t, "total_kw", report.ledger["total_w"] / 1000.0),
            ],
            ignore_index=True,
        )
    if figure == "costs":
        costs = sorted((k, v) for k, v in report.totals.items() if k.startswith(("cost_", "refund_")))
        return _long([k for k, _ in costs], "eur", [v for _, v in costs])

    isp = report.isp
    return pd.concat(
        [
            _long(isp["isp_start"], "delivered_mwh", isp["delivered_mwh"]),
            _long(isp["isp_start"], "forecast_eur_mwh", isp["forecast_eur_mwh"]),
            _long(isp["isp_start"], "spot_eur_mwh", isp["spot_eur_mwh"]),
        ],
        ignore_index=True,
    )


def _sweep_long(path: Path, x_column: str, columns) -> pd.DataFrame:
    if not path.is_file():
        raise DataError(f"Sweep results not found: {path}")
    frame = pd.read_csv(path)
    return pd.concat([_long(frame[x_column], column, frame[column]) for column in columns], ignore_index=True)
