import logging
from dataclasses import replace
from typing import TYPE_CHECKING, List, NamedTuple

import numpy as np

from .base import ConfigError
from .dvfs import drive_pstate, governor_propose, switch_governor
from .machine import cpu_load, cpu_load_avg, flag_vm_cap, new_host, place_vms, size_fleet, size_memory, step_host
from .power_models import eval_power
from .types import Governor, HostState, PState, PStateDriver, ScalingPolicy

if TYPE_CHECKING:
    from .engine import Simulator


class FleetStep(NamedTuple):
    model_watts: List[float]
    demand: float
    granted: float
    overcommit: float
    capacity: float
    usage: float
    load_avg: float


class FleetMixin:
    """Mixin class for host placement, DVFS and host stepping."""

    def _setup_fleet(self: 'Simulator') -> None:
        """Size the fleet, place VMs and give every host its own policy and P-state driver.

        Raises:
            ConfigError: If a non-empty trace sizes to zero hosts without an override
        """
        machine = self.config.machine
        trace = self.trace

        if self.config.hosts is not None:
            n_hosts = self.config.hosts
        else:
            n_hosts = size_fleet(trace.psi_d, machine.max_frequency, machine.core_count)
        if trace.tick_count and n_hosts < 1:
            raise ConfigError("Trace has no CPU demand; set fleet.hosts to simulate an idle fleet")

        self.n_hosts = n_hosts
        self.memory_units = size_memory(trace.psi_m, n_hosts, machine.memory_unit_size) if n_hosts else 0
        self.vm_cap_flags = flag_vm_cap(trace, self.config.vm_cap_mhz)

        placement = place_vms(trace.vm_ids, n_hosts) if n_hosts else {}
        self.host_columns = [
            np.array([column for column, vm_id in enumerate(trace.vm_ids) if placement[vm_id] == host], dtype=int)
            for host in range(n_hosts)
        ]
        self.hosts: List[HostState] = [new_host(host, machine) for host in range(n_hosts)]
        self.policies: List[ScalingPolicy] = [
            replace(self.config.policy, target=self.config.policy.f_max, governor=self.initial_governor) for _ in range(n_hosts)
        ]
        self.drivers: List[PStateDriver] = [PStateDriver(pstates=machine.pstates) for _ in range(n_hosts)]
        self.idle_watts = [eval_power(machine.power_model, 0.0) for _ in range(n_hosts)]

        logging.info(
            f"🖥️ Fleet: {n_hosts} hosts x {machine.core_count} cores @ {machine.max_frequency} MHz, "
            f"{self.memory_units} memory units of {machine.memory_unit_size} MB per host"
        )

    def _host_power(self: 'Simulator', host: HostState, usage: float, pstate: PState) -> float:
        """Modelled power of one host for this tick."""
        model = self.config.machine.power_model
        if self.config.power_source == "model":
            return eval_power(model, usage)
        idle = eval_power(model, 0.0)
        busy_share = usage * host.capacity / (host.core_count * host.current_frequency)
        return idle + (pstate.power - idle) * busy_share

    def _step_fleet(self: 'Simulator', tick: int, governor: Governor) -> FleetStep:
        """Run DVFS and host stepping for every host at one tick."""
        interval = self.trace.interval
        row = self.trace.cpu[tick]
        model_watts = []
        demand = granted = overcommit = capacity = load = 0.0

        for host, policy, driver, columns in zip(self.hosts, self.policies, self.drivers, self.host_columns):
            switch_governor(policy, governor)
            policy.target = governor_propose(policy, 100.0 * host.last_usage)
            pstate = drive_pstate(driver, policy.target)
            host.current_frequency = min(pstate.frequency, host.max_frequency)

            host.demands = {self.trace.vm_ids[column]: float(row[column]) for column in columns}
            result = step_host(host, interval)

            model_watts.append(self._host_power(host, result.usage, pstate))
            demand += result.granted + result.overcommit
            granted += result.granted
            overcommit += result.overcommit
            capacity += host.capacity * interval
            load += cpu_load_avg(cpu_load(host.n_run, host.n_queued, host.n_blocked), host.core_count)

        n_hosts = max(1, len(self.hosts))
        return FleetStep(
            model_watts=model_watts,
            demand=demand,
            granted=granted,
            overcommit=overcommit,
            capacity=capacity,
            usage=granted / capacity if capacity else 0.0,
            load_avg=load / n_hosts,
        )
