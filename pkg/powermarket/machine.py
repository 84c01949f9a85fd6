import logging
import math
from numbers import Integral
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .base import DataError, DomainError, validate_non_negative
from .types import HostState, MachineSpec, StepResult, Trace, TraceRecord

"""
Workload traces, fleet sizing and host stepping with over-commission accounting.
"""

TRACE_COLUMNS = ["timestamp", "vm_id", "cpu_demand_mhz", "memory_mb"]


def _ceil_div(numerator: float, denominator: float) -> int:
    if isinstance(numerator, Integral) and isinstance(denominator, Integral):
        return int(-(-numerator // denominator))
    return int(math.ceil(numerator / denominator))


@validate_non_negative("psi_d")
def size_fleet(psi_d: float, psi_f: float, c: int) -> int:
    """Number of hosts needed to serve the peak aggregate CPU demand.

    Cores are rounded up first, then hosts: ceil(ceil(psi_d / psi_f) / c).

    Args:
        psi_d: Maximum instant aggregate CPU demand in MHz
        psi_f: Per-core maximum frequency in MHz
        c: Logical cores per host

    Returns:
        Host count; 0 when there is no demand

    Raises:
        DomainError: If psi_f <= 0, c < 1 or psi_d < 0
    """
    if psi_f <= 0:
        raise DomainError(f"psi_f must be positive, got {psi_f}")
    if c < 1:
        raise DomainError(f"core count must be >= 1, got {c}")
    cores = _ceil_div(psi_d, psi_f)
    return _ceil_div(cores, c)


@validate_non_negative("psi_m")
def size_memory(psi_m: float, n_hosts: int, m: float) -> int:
    """Memory units per host: ceil(ceil(psi_m / n_hosts) / m).

    Raises:
        DomainError: If n_hosts < 1 or m <= 0
    """
    if n_hosts < 1:
        raise DomainError(f"n_hosts must be >= 1, got {n_hosts}")
    if m <= 0:
        raise DomainError(f"memory unit size must be positive, got {m}")
    per_host = _ceil_div(psi_m, n_hosts)
    return _ceil_div(per_host, m)


def trace_from_records(records: Iterable[TraceRecord], interval: Optional[int] = None) -> Trace:
    """Build a tick-aligned trace from individual samples.

    Demand is held constant between a VM's samples and stays 0 before its first one.

    Args:
        records: Samples sorted by timestamp, then vm_id
        interval: Tick length in seconds; inferred from the first two distinct
            timestamps when omitted

    Returns:
        The trace as demand matrices

    Raises:
        DataError: On negative demand, duplicate or unordered samples of a VM, or a non-uniform interval
    """
    frame = pd.DataFrame(
        [(r.timestamp, r.vm_id, r.cpu_demand, r.memory_demand) for r in records],
        columns=TRACE_COLUMNS,
    )
    return _build_trace(frame, interval)


def load_trace(path: Union[str, Path], interval: Optional[int] = None) -> Trace:
    """Load a `timestamp,vm_id,cpu_demand_mhz,memory_mb` CSV trace.

    Raises:
        DataError: If the file is missing, malformed or fails trace validation
    """
    try:
        frame = pd.read_csv(path, encoding="utf-8", dtype={"vm_id": str})
    except FileNotFoundError:
        raise DataError(f"Trace file not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot parse trace {path}: {e}")

    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in TRACE_COLUMNS if column not in frame.columns]
    if missing:
        raise DataError(f"Trace {path} is missing columns {missing}", details=missing)
    if frame[TRACE_COLUMNS].isna().any().any():
        raise DataError(f"Trace {path} has empty cells")

    trace = _build_trace(frame[TRACE_COLUMNS], interval)
    logging.info(f"📈 Loaded trace {path}: {len(trace.vm_ids)} VMs, {trace.tick_count} ticks of {trace.interval}s")
    return trace


def _build_trace(frame: pd.DataFrame, interval: Optional[int]) -> Trace:
    if frame.empty:
        return Trace(
            timestamps=np.array([], dtype=np.int64),
            vm_ids=(),
            cpu=np.zeros((0, 0)),
            memory=np.zeros((0, 0)),
            interval=int(interval or 0),
        )

    try:
        frame = frame.astype({"timestamp": np.int64, "vm_id": str, "cpu_demand_mhz": float, "memory_mb": float})
    except (ValueError, TypeError) as e:
        raise DataError(f"Trace has non-numeric values: {e}")

    negative = frame[(frame["cpu_demand_mhz"] < 0) | (frame["memory_mb"] < 0)]
    if not negative.empty:
        vm_ids = sorted(negative["vm_id"].unique())
        raise DataError(f"Negative demand for VM(s) {vm_ids}", details=vm_ids)

    ordered = frame.sort_values(["timestamp", "vm_id"], kind="mergesort")
    if not ordered.index.equals(frame.index):
        raise DataError("Trace rows must be sorted by timestamp then vm_id")
    duplicated = frame.duplicated(["timestamp", "vm_id"])
    if duplicated.any():
        vm_ids = sorted(frame.loc[duplicated, "vm_id"].unique())
        raise DataError(f"Samples of VM(s) {vm_ids} are not strictly increasing in time", details=vm_ids)

    stamps = np.unique(frame["timestamp"].to_numpy())
    if len(stamps) >= 2:
        inferred = int(stamps[1] - stamps[0])
        gaps = np.diff(stamps)
        if (gaps != inferred).any():
            raise DataError(f"Trace interval is not uniform (expected {inferred}s between samples)")
        if interval is not None and interval != inferred:
            raise DataError(f"Trace interval {inferred}s disagrees with configured {interval}s")
        interval = inferred
    elif interval is None:
        raise DataError("Cannot infer the trace interval from a single timestamp; configure it")

    vm_order = list(dict.fromkeys(frame["vm_id"]))
    cpu = frame.pivot(index="timestamp", columns="vm_id", values="cpu_demand_mhz").reindex(index=stamps, columns=vm_order)
    memory = frame.pivot(index="timestamp", columns="vm_id", values="memory_mb").reindex(index=stamps, columns=vm_order)

    return Trace(
        timestamps=stamps.astype(np.int64),
        vm_ids=tuple(vm_order),
        cpu=cpu.ffill().fillna(0.0).to_numpy(dtype=float),
        memory=memory.ffill().fillna(0.0).to_numpy(dtype=float),
        interval=int(interval),
    )


def flag_vm_cap(trace: Trace, cap_mhz: Optional[float]) -> List[Tuple[int, str, float]]:
    """List (timestamp, vm_id, demand) samples whose demand exceeds a per-VM cap.

    Demand is never clipped; the flags are informational.
    """
    if cap_mhz is None or trace.tick_count == 0:
        return []
    rows, columns = np.nonzero(trace.cpu > cap_mhz)
    flagged = [(int(trace.timestamps[r]), trace.vm_ids[c], float(trace.cpu[r, c])) for r, c in zip(rows, columns)]
    if flagged:
        logging.warning(f"⚠️ {len(flagged)} trace samples exceed the per-VM cap of {cap_mhz} MHz")
    return flagged


def place_vms(vm_ids: Sequence[str], n_hosts: int) -> Dict[str, int]:
    """Round-robin placement by first-appearance order; VMs never migrate."""
    if n_hosts < 1:
        raise DomainError(f"cannot place VMs on {n_hosts} hosts")
    return {vm_id: position % n_hosts for position, vm_id in enumerate(vm_ids)}


def new_host(host_id: int, spec: MachineSpec) -> HostState:
    return HostState(
        host_id=host_id,
        core_count=spec.core_count,
        max_frequency=spec.max_frequency,
        current_frequency=spec.max_frequency,
    )


def step_host(state: HostState, interval: float) -> StepResult:
    """Advance one host by one tick at its current package frequency.

    Args:
        state: Host with resident demands and the frequency chosen by DVFS
        interval: Tick length in seconds

    Returns:
        (granted MHz*s, over-committed MHz*s, usage fraction S/F)

    Raises:
        DomainError: If interval <= 0
        DataError: If a resident VM has negative demand
    """
    if interval <= 0:
        raise DomainError(f"interval must be positive, got {interval}")
    for vm_id, demand in state.demands.items():
        if demand < 0:
            raise DataError(f"Negative CPU demand {demand} MHz for VM {vm_id}", details=[vm_id])

    demand = float(sum(state.demands.values()))
    speed = min(demand, state.core_count * state.current_frequency)
    granted = speed * interval
    overcommit = max(0.0, demand * interval - granted)
    usage = speed / state.capacity

    active = sum(1 for value in state.demands.values() if value > 0)
    state.n_run = min(active, state.core_count)
    state.n_queued = max(0, active - state.core_count)
    state.n_blocked = 0

    state.cumulative_demand += demand * interval
    state.cumulative_granted += granted
    state.cumulative_overcommit += overcommit
    state.wall_time += interval
    state.cpu_time += interval * usage
    state.cumulative_idle_time += interval * (1.0 - usage)
    state.last_usage = usage
    return StepResult(granted=granted, overcommit=overcommit, usage=usage)


@validate_non_negative("n_run", "n_queued", "n_blocked")
def cpu_load(n_run: int, n_queued: int, n_blocked: int) -> int:
    """Tasks running, waiting for a core, or blocked."""
    return n_run + n_queued + n_blocked


def cpu_load_avg(load: float, c: int) -> float:
    if c == 0:
        raise DomainError("cannot average load over 0 cores")
    return load / c


def cpu_utilization(t_cpu: float, t_wall: float) -> float:
    """Share of wall time the CPU was busy.

    Raises:
        DomainError: If t_wall <= 0 or t_cpu lies outside [0, t_wall]
    """
    if t_wall <= 0:
        raise DomainError(f"t_wall must be positive, got {t_wall}")
    if t_cpu < 0 or t_cpu > t_wall:
        raise DomainError(f"t_cpu must lie in [0, t_wall], got {t_cpu}")
    return t_cpu / t_wall


def overcommit_percent(hosts: Sequence[HostState]) -> float:
    """Cumulative over-committed cycles over demanded cycles, in percent."""
    demanded = sum(host.cumulative_demand for host in hosts)
    if demanded <= 0:
        return 0.0
    return 100.0 * sum(host.cumulative_overcommit for host in hosts) / demanded
