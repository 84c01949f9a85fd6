import logging
import math

from .base import ConfigError, DomainError
from .types import Governor, PState, PStateDriver, ScalingPolicy


def governor_propose(policy: ScalingPolicy, load_percent: float) -> float:
    """Propose the next package frequency for the policy's governor.

    Ondemand jumps straight to f_max at or above the up threshold and otherwise
    scales linearly between f_min and f_max. Conservative moves the current
    target by step_fraction * f_max per call.

    Args:
        policy: Scaling limits, current target and governor
        load_percent: Governor input load l in [0, 100]

    Returns:
        Proposed target in MHz, always within [f_min, f_max]

    Raises:
        DomainError: If load_percent is outside [0, 100]
    """
    if not isinstance(load_percent, (int, float)) or math.isnan(load_percent) or not 0.0 <= load_percent <= 100.0:
        raise DomainError(f"load percent must lie in [0, 100], got {load_percent}")

    governor = policy.governor
    if governor == "performance":
        return policy.f_max
    elif governor == "powersave":
        return policy.f_min
    elif governor == "ondemand":
        if load_percent >= policy.up_threshold:
            return policy.f_max
        return policy.f_min + load_percent * (policy.f_max - policy.f_min) / 100.0
    elif governor == "conservative":
        step = policy.step_fraction * policy.f_max
        if load_percent >= policy.up_threshold:
            return min(policy.f_max, policy.target + step)
        if load_percent < policy.down_threshold:
            return max(policy.f_min, policy.target - step)
        return policy.target
    else:
        raise ConfigError(f"Unsupported governor: {governor}")


def switch_governor(policy: ScalingPolicy, governor: Governor) -> None:
    """Change the active governor; the current target carries over."""
    if governor != policy.governor:
        logging.debug(f"🔁 Governor {policy.governor} -> {governor}")
        policy.governor = governor


def drive_pstate(driver: PStateDriver, target: float) -> PState:
    """Select the package P-state for a target frequency.

    Picks the slowest P-state whose frequency is at least the target. Targets
    beyond either end of the table clamp to that end and are counted in
    driver.clamps.

    Args:
        driver: The P-state table, fastest first
        target: Requested frequency in MHz

    Returns:
        The P-state the whole package adopts

    Raises:
        ConfigError: If the table is empty
    """
    if not driver.pstates:
        raise ConfigError("P-state table must not be empty")

    highest, lowest = driver.pstates[0], driver.pstates[-1]
    if target > highest.frequency:
        driver.clamps += 1
        logging.debug(f"📌 Target {target} MHz above P0 ({highest.frequency} MHz), clamped")
        return highest
    if target < lowest.frequency:
        driver.clamps += 1
        logging.debug(f"📌 Target {target} MHz below the slowest P-state ({lowest.frequency} MHz), clamped")
        return lowest

    for pstate in reversed(driver.pstates):
        if pstate.frequency >= target:
            return pstate
    return highest
