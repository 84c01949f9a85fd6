import logging
from collections import defaultdict
from typing import TYPE_CHECKING, Dict

import pandas as pd

from .power_chain import facility_power
from .tables import ISP_SECONDS, JOULES_PER_MWH, LEDGER_COLUMNS
from .types import Governor, PowerBreakdown

if TYPE_CHECKING:
    from .engine import Simulator
    from .fleet import FleetStep


FLEET_COLUMNS = (
    "t",
    "governor",
    "compute_w",
    "demand_mhz_s",
    "granted_mhz_s",
    "overcommit_mhz_s",
    "usage",
    "cpu_load_avg",
    "curtailed_w",
)


class LedgerMixin:
    """Mixin class for the per-tick power ledger and ISP energy attribution."""

    def _init_ledger(self: 'Simulator') -> None:
        self._ledger_rows = []
        self._fleet_rows = []
        self._isp_joules: Dict[int, float] = defaultdict(float)
        self.secondary_clamps = 0
        self.psu_overloads = 0

    def _record_tick(self: 'Simulator', tick: int, governor: Governor, step: 'FleetStep') -> PowerBreakdown:
        """Push one tick's host power through the chain and book it."""
        t = int(self.trace.timestamps[tick])
        interval = self.trace.interval
        power = facility_power(self.config.topology, step.model_watts, interval)

        self.secondary_clamps += int(power.secondary_clamped)
        self.psu_overloads += power.psu_overloads
        self._ledger_rows.append(
            (t, power.servers_w, power.psu_loss_w, power.pdu_loss_w, power.ups_loss_w, power.secondary_w, power.total_w)
        )
        self._fleet_rows.append(
            (
                t,
                governor,
                float(sum(step.model_watts)),
                step.demand,
                step.granted,
                step.overcommit,
                step.usage,
                step.load_avg,
                power.curtailed_w,
            )
        )
        self._attribute_to_isps(t, interval, power.total_w)
        return power

    def _attribute_to_isps(self: 'Simulator', t: int, interval: int, total_w: float) -> None:
        """Split a tick's energy over the ISPs it overlaps."""
        cursor, end = t, t + interval
        while cursor < end:
            isp_start = cursor - cursor % ISP_SECONDS
            segment_end = min(end, isp_start + ISP_SECONDS)
            self._isp_joules[isp_start] += total_w * (segment_end - cursor)
            cursor = segment_end

    def ledger_frame(self: 'Simulator') -> pd.DataFrame:
        return pd.DataFrame(self._ledger_rows, columns=list(LEDGER_COLUMNS))

    def fleet_frame(self: 'Simulator') -> pd.DataFrame:
        return pd.DataFrame(self._fleet_rows, columns=list(FLEET_COLUMNS))

    def isp_energy(self: 'Simulator') -> pd.Series:
        """Delivered facility energy per ISP start, in MWh."""
        starts = sorted(self._isp_joules)
        index = pd.to_datetime(starts, unit="s", utc=True)
        return pd.Series([self._isp_joules[s] / JOULES_PER_MWH for s in starts], index=index, dtype=float, name="delivered_mwh")

    def _log_ledger_summary(self: 'Simulator') -> None:
        if self.secondary_clamps:
            logging.warning(f"⚠️ Secondary power clamped to 0 on {self.secondary_clamps} ticks; PUE is too low for the modelled losses")
        if self.psu_overloads:
            logging.warning(f"⚠️ PSUs ran above rated output on {self.psu_overloads} host-ticks")
