import logging
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .base import ConfigError, DataError, DomainError, SimulationError
from .billing import BillingMixin
from .fleet import FleetMixin
from .forecast import agreement_accuracy, forecast_series, load_inferences, synth_forecast
from .ledger import LedgerMixin
from .machine import cpu_utilization, load_trace, overcommit_percent
from .market import load_price_book, price_correlation
from .scheduler import damp, decide, new_state
from .tables import DECISION_COLUMNS, ISP_SECONDS, JOULES_PER_KWH
from .types import PriceBook, RunReport, ScenarioConfig, Trace


class Simulator(FleetMixin, LedgerMixin, BillingMixin):
    """Trace-driven datacenter power and market co-simulation.

    One instance runs one scenario. Per tick it holds the trace demand, lets
    the governors propose frequencies, drives the P-states, evaluates host
    power and pushes it through PSU, PDU, UPS and secondary support into the
    ledger. When a scheduler is configured it switches governors at every ISP
    start from the forecast shortage price and applies the damping guard every
    tick. After the last tick the delivered energy is procured and settled.

    Example:
        >>> report = Simulator(load_scenario("scenario.yaml")).run()
        >>> report.totals["energy_kwh"]

    Attributes:
        config: The scenario
        trace: Tick-aligned VM demand
        book: Spot and imbalance prices, or None without price files
        forecast: Forecast shortage price per ISP start, or None
    """

    def __init__(
        self,
        config: ScenarioConfig,
        trace: Optional[Trace] = None,
        book: Optional[PriceBook] = None,
        forecast: Optional[pd.Series] = None,
    ):
        """Load the scenario inputs and set up the fleet.

        Args:
            config: Validated scenario
            trace: Preloaded trace; read from config.trace_path when omitted
            book: Preloaded prices; read from the configured price files when omitted
            forecast: Preloaded forecast per ISP; built from the inference file or
                the synthetic predictor when omitted

        Raises:
            ConfigError: If the scheduler lacks prices or a forecast, or the fleet is empty
            DataError: If an input file is malformed
        """
        self.config = config
        self.trace = trace if trace is not None else load_trace(config.trace_path, config.trace_interval)
        if book is None and config.spot_path and config.imbalance_path:
            book = load_price_book(config.spot_path, config.imbalance_path)
        self.book = book
        self.forecast = forecast if forecast is not None else self._load_forecast()

        scheduler = config.scheduler
        if scheduler is not None and (self.book is None or self.forecast is None):
            raise ConfigError("The DVFS scheduler needs spot/imbalance prices and a forecast (inference file or synthetic sigma)")
        self.initial_governor = scheduler.default_rung if scheduler is not None else config.governor

        self._setup_fleet()
        self._init_ledger()

    def _load_forecast(self) -> Optional[pd.Series]:
        config = self.config
        if config.inference_path:
            mode = config.scheduler.forecast_mode if config.scheduler is not None else "average"
            return forecast_series(load_inferences(config.inference_path), mode)
        if config.synthetic_sigma is not None and self.book is not None:
            return synth_forecast(self.book.imbalance["shortage"], config.synthetic_sigma, config.seed)
        return None

    def _spot_for(self, isp_start: pd.Timestamp) -> float:
        hour = isp_start.floor("h")
        if hour not in self.book.spot.index:
            raise DataError(f"No spot price for hour {hour}", details=[hour])
        return float(self.book.spot[hour])

    def run(self) -> RunReport:
        """Simulate every tick, then settle the delivered energy.

        Returns:
            The run report

        Raises:
            SimulationError: Wrapping any module error with the failing tick
        """
        config = self.config
        scheduler = config.scheduler
        state = new_state(scheduler) if scheduler is not None else None
        governor = self.initial_governor
        current_isp = None
        forecast = self.forecast if self.forecast is not None else pd.Series(dtype=float)

        logging.info(f"⚡ Simulating {self.trace.tick_count} ticks on {self.n_hosts} hosts")
        for tick in range(self.trace.tick_count):
            t = int(self.trace.timestamps[tick])
            try:
                if state is not None:
                    isp_start = t - t % ISP_SECONDS
                    if isp_start != current_isp:
                        current_isp = isp_start
                        stamp = pd.Timestamp(isp_start, unit="s", tz="UTC")
                        oc_delta = max(0.0, overcommit_percent(self.hosts) - state.oc_reference)
                        pf = forecast.get(stamp)
                        governor = decide(None if pf is None else float(pf), self._spot_for(stamp), state, scheduler, stamp, oc_delta)

                step = self._step_fleet(tick, governor)
                self._record_tick(tick, governor, step)

                if state is not None:
                    oc_delta = max(0.0, overcommit_percent(self.hosts) - state.oc_reference)
                    governor = damp(state, scheduler, oc_delta)
            except SimulationError:
                raise
            except Exception as e:
                raise SimulationError(str(e), tick, t) from e

        self._log_ledger_summary()
        clamps = sum(driver.clamps for driver in self.drivers)
        if clamps:
            logging.info(f"📌 {clamps} P-state requests were clamped to the table ends")

        delivered = self.isp_energy()
        isps, settlement, costs = self._bill(delivered)
        decisions = pd.DataFrame(state.decisions if state is not None else [], columns=list(DECISION_COLUMNS))

        report = RunReport(
            ledger=self.ledger_frame(),
            fleet=self.fleet_frame(),
            isp=isps,
            settlement=settlement,
            decisions=decisions,
            totals={},
            metrics={},
            base_kw=float(sum(self.idle_watts)) / 1000.0,
            n_hosts=self.n_hosts,
        )
        report.totals = self._totals(report, delivered, costs, clamps)
        if len(report.ledger):
            try:
                report.metrics = metrics(report, config.topology.pue)
            except DomainError as e:
                logging.warning(f"⚠️ Efficiency metrics unavailable: {e}")
        if self.forecast is not None and len(isps):
            known = isps.dropna(subset=["forecast_eur_mwh"])
            if len(known):
                report.metrics["agreement_accuracy"] = agreement_accuracy(
                    known["shortage_eur_mwh"], known["forecast_eur_mwh"], known["spot_eur_mwh"], config.aa_mode
                )
        if self.book is not None and len(self.book.imbalance):
            for pair, (r, _) in price_correlation(self.book).items():
                report.metrics[f"pearson_{pair}"] = r

        logging.info(
            f"✅ Run complete: {report.totals['energy_kwh']:.3f} kWh, "
            f"over-commission {report.totals['overcommit_pct']:.3f}%"
        )
        return report

    def _totals(self, report: RunReport, delivered: pd.Series, costs: Dict[str, float], clamps: int) -> Dict[str, float]:
        interval = self.trace.interval
        ledger, fleet = report.ledger, report.fleet
        to_kwh = interval / JOULES_PER_KWH
        duration = self.trace.tick_count * interval
        compute_kwh = float(fleet["compute_w"].sum()) * to_kwh
        base_kwh = report.base_kw * duration / 3600.0
        peak_kwh = compute_kwh - base_kwh
        demand = float(fleet["demand_mhz_s"].sum())
        overcommit = float(fleet["overcommit_mhz_s"].sum())

        totals = {
            "ticks": self.trace.tick_count,
            "interval_s": interval,
            "duration_s": duration,
            "n_hosts": self.n_hosts,
            "memory_units_per_host": self.memory_units,
            "energy_kwh": float(ledger["total_w"].sum()) * to_kwh,
            "it_energy_kwh": float(ledger["servers_w"].sum()) * to_kwh,
            "psu_loss_kwh": float(ledger["psu_loss_w"].sum()) * to_kwh,
            "pdu_loss_kwh": float(ledger["pdu_loss_w"].sum()) * to_kwh,
            "ups_loss_kwh": float(ledger["ups_loss_w"].sum()) * to_kwh,
            "secondary_kwh": float(ledger["secondary_w"].sum()) * to_kwh,
            "compute_energy_kwh": compute_kwh,
            "base_energy_kwh": base_kwh,
            "peak_energy_kwh": peak_kwh,
            "curtailed_kwh": float(fleet["curtailed_w"].sum()) * to_kwh,
            "delivered_mwh": float(delivered.sum()),
            "demand_mhz_s": demand,
            "overcommit_mhz_s": overcommit,
            "overcommit_pct": 100.0 * overcommit / demand if demand else 0.0,
            "mean_cpu_load_avg": float(fleet["cpu_load_avg"].mean()) if len(fleet) else 0.0,
            "mean_cpu_utilization": float(np.mean([cpu_utilization(h.cpu_time, h.wall_time) for h in self.hosts])) if duration else 0.0,
            "pstate_clamps": clamps,
            "psu_overloads": self.psu_overloads,
            "secondary_clamps": self.secondary_clamps,
            "vm_cap_flags": len(self.vm_cap_flags),
        }
        totals.update(costs)
        for tariff in self.config.tariffs:
            totals[f"cost_on_demand_{tariff.label}_base_eur"] = base_kwh / 1000.0 * tariff.price
            totals[f"cost_on_demand_{tariff.label}_peak_eur"] = peak_kwh / 1000.0 * tariff.price
        return totals


def run(config: ScenarioConfig) -> RunReport:
    """Run one scenario end to end."""
    return Simulator(config).run()


def efficiency_metrics(utilization: float, p_it: float, p_total: float, p_compute: float, pue: Optional[float] = None) -> Dict[str, float]:
    """Facility efficiency ratios.

    Args:
        utilization: Average CPU utilization U
        p_it: IT (server wall) power
        p_total: Facility power
        p_compute: Compute power inside the servers (modelled CPU power)
        pue: Configured PUE; the measured p_total / p_it is used when omitted

    Returns:
        Dict with pue, pue_measured = P_total / P_IT, cpe = U * P_IT / P_total,
        itue = P_IT / P_compute and tue = itue * pue

    Raises:
        DomainError: If any denominator is not positive
    """
    if p_it <= 0 or p_total <= 0 or p_compute <= 0:
        raise DomainError(f"efficiency metrics need positive powers, got P_IT={p_it}, P_total={p_total}, P_compute={p_compute}")
    measured = p_total / p_it
    if pue is None:
        pue = measured
    itue = p_it / p_compute
    return {
        "utilization": utilization,
        "pue": pue,
        "pue_measured": measured,
        "cpe": utilization * p_it / p_total,
        "itue": itue,
        "tue": itue * pue,
    }


def metrics(report: RunReport, pue: Optional[float] = None) -> Dict[str, float]:
    """Run-averaged PUE, CPE, ITUE and TUE of a report.

    `pue` is the facility's configured PUE; the ledger's total over IT power is
    reported next to it as pue_measured.

    Raises:
        DomainError: If the report has no ticks or zero IT or compute power
    """
    if report.ledger.empty:
        raise DomainError("metrics need a non-empty ledger")
    return efficiency_metrics(
        utilization=float(report.fleet["usage"].mean()),
        p_it=float(report.ledger["servers_w"].mean()),
        p_total=float(report.ledger["total_w"].mean()),
        p_compute=float(report.fleet["compute_w"].mean()),
        pue=pue,
    )


def decompose_loads(report: RunReport) -> Tuple[float, pd.Series]:
    """Split compute power into the fleet's idle base load and the peak load above it.

    Returns:
        (base kW, peak kW per tick indexed by t)

    Raises:
        DomainError: If the report has no ticks
    """
    if report.ledger.empty:
        raise DomainError("load decomposition needs a non-empty ledger")
    compute_kw = report.fleet["compute_w"].to_numpy(dtype=float) / 1000.0
    peak = pd.Series(compute_kw - report.base_kw, index=report.fleet["t"].to_numpy(), name="peak_kw")
    return report.base_kw, peak
