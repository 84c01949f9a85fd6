import logging
import math
from typing import List, Sequence, Tuple

from .base import ConfigError, DomainError, validate_non_negative
from .types import PowerBreakdown, PowerTopology, PsuSpec, PsuStep, SupportUnitSpec

"""
Power-chain loss models (PSU, PDU, UPS, secondary support) and their
composition over the datacenter topology.
"""


def psu_efficiency(spec: PsuSpec, eta_l: float) -> float:
    """Efficiency percent for a load percent; first bound >= eta_l wins, the last pair covers overload."""
    for bound, efficiency in spec.efficiency_curve:
        if eta_l <= bound:
            return efficiency
    return spec.efficiency_curve[-1][1]


@validate_non_negative("p_server")
def psu_step(spec: PsuSpec, p_server: float, dt: float) -> PsuStep:
    """PSU conversion loss while delivering p_server for dt seconds.

    Args:
        spec: Rated output and efficiency curve
        p_server: DC output power in watts
        dt: Step length in seconds

    Returns:
        Load percent, efficiency percent, loss watts, loss joules and an overload flag

    Raises:
        DomainError: If p_server < 0 or dt <= 0
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    eta_l = 100.0 * p_server / spec.rated_output
    eta_e = psu_efficiency(spec, eta_l)
    overloaded = p_server > spec.rated_output
    if overloaded:
        logging.debug(f"⚠️ PSU overloaded: {p_server:.1f} W over {spec.rated_output:.1f} W rated")
    loss = p_server * 100.0 / eta_e - p_server
    return PsuStep(eta_l=eta_l, eta_e=eta_e, loss_power=loss, energy_loss=loss * dt, overloaded=overloaded)


def psu_output_within(spec: PsuSpec, p_in: float) -> float:
    """Largest DC output whose wall draw (output plus PSU loss) fits within p_in watts."""
    best, lower = 0.0, 0.0
    last = len(spec.efficiency_curve) - 1
    for position, (bound, efficiency) in enumerate(spec.efficiency_curve):
        upper = math.inf if position == last else bound * spec.rated_output / 100.0
        output = min(upper, p_in * efficiency / 100.0)
        if output > lower or position == 0:
            best = max(best, output)
        lower = upper
    return best


def _check_coefficients(spec: SupportUnitSpec) -> None:
    if spec.nameplate_loss < spec.tare_loss:
        raise ConfigError(f"{spec.kind} nameplate loss {spec.nameplate_loss} is below tare loss {spec.tare_loss}")


@validate_non_negative("sum_server_in")
def pdu_loss(spec: SupportUnitSpec, sum_server_in: float, literal: bool = False) -> float:
    """PDU loss: tare plus a square law in the load.

    The default square law works on per-unit load, so a fully loaded PDU loses
    nameplate_loss * rated_power. With literal=True the square law is applied to
    raw watts.
    """
    _check_coefficients(spec)
    if literal:
        return spec.tare_power + spec.load_coefficient * sum_server_in ** 2
    per_unit = sum_server_in / spec.rated_power
    return spec.tare_power + spec.load_coefficient * per_unit ** 2 * spec.rated_power


@validate_non_negative("sum_pdu_in")
def ups_loss(spec: SupportUnitSpec, sum_pdu_in: float) -> float:
    """UPS loss: tare plus a proportional term."""
    _check_coefficients(spec)
    return spec.tare_power + spec.load_coefficient * sum_pdu_in


def secondary_power(pue: float, sum_server: float, sum_pdu_loss: float, sum_ups_loss: float) -> float:
    """Power of cooling, lighting and the rest of the secondary support.

    The share of the pue * servers facility budget left once the servers
    and the modelled PDU and UPS losses are paid for. Clamped to zero with a
    warning when the losses exceed it.
    """
    if pue < 1:
        raise DomainError(f"pue must be >= 1, got {pue}")
    raw = pue * sum_server - (sum_server + sum_pdu_loss + sum_ups_loss)
    if raw < 0:
        logging.warning(f"⚠️ Secondary power would be {raw:.1f} W at PUE {pue}; clamped to 0")
        return 0.0
    return raw


def maxmin_share(capacity: float, demands: Sequence[float]) -> List[float]:
    """Max-min fair allocation by progressive filling.

    Args:
        capacity: Power to distribute, >= 0
        demands: Requested power per consumer, each >= 0

    Returns:
        Allocations in the order of demands; they sum to min(capacity, sum(demands))
    """
    if capacity < 0 or any(demand < 0 for demand in demands):
        raise DomainError("capacity and demands must be non-negative")

    allocations = [0.0] * len(demands)
    remaining = float(capacity)
    order = sorted(range(len(demands)), key=lambda i: demands[i])
    for position, index in enumerate(order):
        share = remaining / (len(order) - position)
        granted = min(float(demands[index]), share)
        allocations[index] = granted
        remaining -= granted
    return allocations


def _groups(values: Sequence[float], size: int) -> List[Sequence[float]]:
    return [values[start:start + size] for start in range(0, len(values), size)]


def _feed_tier(spec: SupportUnitSpec, children: Sequence[float], cap: bool) -> Tuple[float, float]:
    """Return (input watts, curtailed watts) of one unit fed by its children."""
    demand = float(sum(children))
    if cap and demand > spec.rated_power:
        delivered = sum(maxmin_share(spec.rated_power, children))
        return delivered, demand - delivered
    return demand, 0.0


def _cap_rack_feeds(
    topology: PowerTopology, outputs: Sequence[float], steps: Sequence[PsuStep], dt: float
) -> Tuple[List[float], List[PsuStep], float]:
    """Curtail the hosts of overloaded rack PDUs and redo their PSU conversion on the capped output.

    Returns:
        (DC output per host, PSU step per host, curtailed wall watts)
    """
    rated = topology.rack_pdu.rated_power
    capped, capped_steps, curtailed = list(outputs), list(steps), 0.0
    for start in range(0, len(outputs), topology.hosts_per_rack_pdu):
        rack = range(start, min(start + topology.hosts_per_rack_pdu, len(outputs)))
        wall = [outputs[i] + steps[i].loss_power for i in rack]
        if sum(wall) <= rated:
            continue
        for i, demand, share in zip(rack, wall, maxmin_share(rated, wall)):
            if share >= demand:
                continue
            capped[i] = min(outputs[i], psu_output_within(topology.psu, share))
            capped_steps[i] = psu_step(topology.psu, capped[i], dt)
            curtailed += demand - (capped[i] + capped_steps[i].loss_power)
    return capped, capped_steps, curtailed


def required_units(n_hosts: int, topology: PowerTopology) -> Tuple[int, int, int]:
    """Counts of (rack PDUs, floor PDUs, UPS units) serving n_hosts."""
    rack = math.ceil(n_hosts / topology.hosts_per_rack_pdu)
    floor = math.ceil(rack / topology.rack_pdus_per_floor_pdu) if topology.rack_pdus_per_floor_pdu else 0
    top_tier = floor if topology.rack_pdus_per_floor_pdu else rack
    ups = math.ceil(top_tier / topology.pdus_per_ups)
    if topology.ups_count is not None:
        if topology.ups_count < ups:
            raise ConfigError(f"{topology.ups_count} UPS units cannot carry {top_tier} PDUs ({ups} needed)")
        ups = topology.ups_count
    return rack, floor, ups


def facility_power(topology: PowerTopology, model_watts: Sequence[float], dt: float) -> PowerBreakdown:
    """Aggregate host power up the chain: servers -> rack PDUs -> floor PDUs -> UPS -> facility.

    Args:
        topology: Wiring, unit specs and PUE
        model_watts: Modelled (DC) power of each host, in host order
        dt: Tick length in seconds

    Returns:
        The tick's power breakdown. servers_w is the servers' wall power (PSU
        loss included), so total_w == pue * servers_w unless the secondary
        clamp fires or rated-power capping curtails load. Hosts curtailed by
        their rack PDU pay PSU loss on the capped output.
    """
    outputs = list(model_watts)
    psu = [psu_step(topology.psu, watts, dt) for watts in outputs]
    curtailed = 0.0
    if topology.cap_by_rated:
        outputs, psu, curtailed = _cap_rack_feeds(topology, outputs, psu, dt)
    wall = [watts + step.loss_power for watts, step in zip(outputs, psu)]
    psu_total = sum(step.loss_power for step in psu)
    overloads = sum(1 for step in psu if step.overloaded)
    literal = topology.literal_support_loss
    cap = topology.cap_by_rated

    _, _, n_ups = required_units(len(model_watts), topology)

    rack_out, pdu_total, servers = [], 0.0, 0.0
    for hosts in _groups(wall, topology.hosts_per_rack_pdu):
        fed, cut = _feed_tier(topology.rack_pdu, hosts, cap)
        curtailed += cut
        servers += fed
        loss = pdu_loss(topology.rack_pdu, fed, literal)
        pdu_total += loss
        rack_out.append(fed + loss)

    top_out = rack_out
    if topology.rack_pdus_per_floor_pdu:
        top_out = []
        for racks in _groups(rack_out, topology.rack_pdus_per_floor_pdu):
            fed, cut = _feed_tier(topology.floor_pdu, racks, cap)
            curtailed += cut
            loss = pdu_loss(topology.floor_pdu, fed, literal)
            pdu_total += loss
            top_out.append(fed + loss)

    ups_total = 0.0
    groups = _groups(top_out, topology.pdus_per_ups)
    for pdus in groups:
        fed, cut = _feed_tier(topology.ups, pdus, cap)
        curtailed += cut
        ups_total += ups_loss(topology.ups, fed)
    ups_total += (n_ups - len(groups)) * ups_loss(topology.ups, 0.0)

    raw_secondary = topology.pue * servers - (servers + pdu_total + ups_total)
    secondary = secondary_power(topology.pue, servers, pdu_total, ups_total)
    total = servers + pdu_total + ups_total + secondary

    return PowerBreakdown(
        servers_w=servers,
        psu_loss_w=psu_total,
        pdu_loss_w=pdu_total,
        ups_loss_w=ups_total,
        secondary_w=secondary,
        total_w=total,
        curtailed_w=curtailed,
        secondary_clamped=raw_secondary < 0,
        psu_overloads=overloads,
    )
