import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import yaml

from .base import ConfigError, DataError, PowerMarketError
from .power_models import load_power_table, load_pstate_table
from .tables import DEFAULT_LADDER, DEFAULT_RUNG, TITANIUM_EFFICIENCY, governor_from_name, power_model_from_name
from .types import (
    MachineSpec,
    OnDemandTariff,
    PowerModelSpec,
    PowerTopology,
    ProcurementStrategy,
    PsuSpec,
    ScalingPolicy,
    ScenarioConfig,
    SchedulerConfig,
    SupportUnitSpec,
)

"""
Scenario loader for the YAML scenario file: one mapping per section, keys carrying
their unit (`rated_output_w` under `psu`); relative paths resolve against the file's
directory.
"""

SECTIONS = (
    "run",
    "trace",
    "machine",
    "fleet",
    "power_model",
    "psu",
    "topology",
    "rack_pdu",
    "floor_pdu",
    "ups",
    "dvfs",
    "scheduler",
    "forecast",
    "market",
    "tariffs",
)
_UNBOUNDED = {"inf", "infinity", "unbounded", "none"}


def _as_float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError("boolean is not a number")
    return float(value)


def _as_int(value: Any) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ValueError("not an integer")
    return int(value)


class _Section:
    """Typed accessors over one config section, raising ConfigError with the key name."""

    def __init__(self, document: Dict[str, Any], name: str, base_dir: Path):
        self.name = name
        self.base_dir = base_dir
        values = document.get(name)
        if values is None:
            values = {}
        if not isinstance(values, dict):
            raise ConfigError(f"Section {name} must be a mapping, got {type(values).__name__}")
        self.values = values

    def _raw(self, key: str) -> Any:
        value = self.values.get(key)
        if value is None or (isinstance(value, str) and not value.strip()):
            return None
        return value.strip() if isinstance(value, str) else value

    def _convert(self, key: str, convert: Callable[[Any], Any], default: Any, required: bool) -> Any:
        raw = self._raw(key)
        if raw is None:
            if required:
                raise ConfigError(f"Missing required key {self.name}.{key}")
            return default
        try:
            return convert(raw)
        except (ValueError, TypeError):
            raise ConfigError(f"Invalid value for {self.name}.{key}: {raw!r}")

    def get_float(self, key: str, default: Optional[float] = None, required: bool = False) -> Optional[float]:
        return self._convert(key, _as_float, default, required)

    def get_int(self, key: str, default: Optional[int] = None, required: bool = False) -> Optional[int]:
        return self._convert(key, _as_int, default, required)

    def get_str(self, key: str, default: Optional[str] = None, required: bool = False) -> Optional[str]:
        return self._convert(key, str, default, required)

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self._raw(key)
        if raw is None:
            return default
        if not isinstance(raw, bool):
            raise ConfigError(f"Invalid boolean for {self.name}.{key}: {raw!r}")
        return raw

    def get_path(self, key: str, required: bool = False) -> Optional[str]:
        raw = self._convert(key, str, None, required)
        if raw is None:
            return None
        resolved = Path(raw) if Path(raw).is_absolute() else self.base_dir / raw
        if not resolved.exists():
            raise ConfigError(f"{self.name}.{key} refers to a missing file: {resolved}")
        return str(resolved)


def _parse_curve(raw: Any) -> Tuple[Tuple[float, float], ...]:
    if not isinstance(raw, list):
        raise ValueError("expected a list of [bound_pct, efficiency_pct] pairs")
    pairs = []
    for item in raw:
        bound, efficiency = item
        pairs.append((_as_float(bound), _as_float(efficiency)))
    return tuple(pairs)


def _parse_damping(raw: Any) -> float:
    if isinstance(raw, str) and raw.lower() in _UNBOUNDED:
        return math.inf
    return _as_float(raw)


def _parse_ladder(raw: Any) -> Tuple[str, ...]:
    names = raw.split(",") if isinstance(raw, str) else raw
    if not isinstance(names, list):
        raise ValueError("expected a list of governors")
    return tuple(governor_from_name(str(name)) for name in names)


def _support_unit(document: Dict[str, Any], name: str, kind: str, base_dir: Path) -> SupportUnitSpec:
    if document.get(name) is None:
        raise ConfigError(f"Missing required section {name} (loss coefficients have no defaults)")
    section = _Section(document, name, base_dir)
    return SupportUnitSpec(
        kind=kind,
        nameplate_loss=section.get_float("nameplate_loss", required=True),
        tare_loss=section.get_float("tare_loss", required=True),
        rated_power=section.get_float("rated_power_w", required=True),
    )


def _power_model(section: _Section) -> PowerModelSpec:
    variant = power_model_from_name(section.get_str("variant", "linear"))
    table = ()
    if variant == "interpolation":
        try:
            table = load_power_table(section.get_path("table", required=True))
        except DataError as e:
            raise ConfigError(str(e))
    return PowerModelSpec(
        variant=variant,
        p_idle=section.get_float("p_idle_w", 0.0),
        p_max=section.get_float("p_max_w", 0.0),
        constant=section.get_float("constant_w", 0.0),
        r=section.get_float("r", 1.4),
        a=section.get_float("a"),
        table=table,
    )


def parse_scenario(document: Dict[str, Any], base_dir: Union[str, Path]) -> ScenarioConfig:
    """Build a ScenarioConfig from the parsed scenario mapping.

    Args:
        document: Parsed scenario, one mapping per section
        base_dir: Directory relative paths resolve against

    Returns:
        The validated scenario

    Raises:
        ConfigError: On missing sections or keys, bad values or missing files
    """
    base_dir = Path(base_dir)

    def section(name: str) -> _Section:
        return _Section(document, name, base_dir)

    run = section("run")
    trace = section("trace")
    machine = section("machine")
    power = section("power_model")
    dvfs = section("dvfs")
    market = section("market")
    forecast = section("forecast")

    try:
        pstates = load_pstate_table(machine.get_path("pstate_table", required=True))
    except DataError as e:
        raise ConfigError(str(e))
    max_frequency = machine.get_float("max_frequency_mhz", required=True)
    machine_spec = MachineSpec(
        core_count=machine.get_int("core_count", required=True),
        max_frequency=max_frequency,
        memory_unit_size=machine.get_float("memory_unit_size_mb", required=True),
        pstates=pstates,
        power_model=_power_model(power),
    )

    f_max = dvfs.get_float("f_max_mhz", min(max_frequency, max(p.frequency for p in pstates)))
    policy = ScalingPolicy(
        f_min=dvfs.get_float("f_min_mhz", min(p.frequency for p in pstates)),
        f_max=f_max,
        target=f_max,
        up_threshold=dvfs.get_float("up_threshold_pct", 80.0),
        step_fraction=dvfs.get_float("step_fraction", 0.05),
        down_threshold=dvfs.get_float("down_threshold_pct"),
    )

    psu = section("psu")
    topo = section("topology")
    floor_pdu = _support_unit(document, "floor_pdu", "pdu", base_dir) if document.get("floor_pdu") is not None else None
    topology = PowerTopology(
        hosts_per_rack_pdu=topo.get_int("hosts_per_rack_pdu", required=True),
        rack_pdus_per_floor_pdu=topo.get_int("rack_pdus_per_floor_pdu", 0),
        pdus_per_ups=topo.get_int("pdus_per_ups", required=True),
        ups_count=topo.get_int("ups_count"),
        pue=topo.get_float("pue", required=True),
        psu=PsuSpec(
            rated_output=psu.get_float("rated_output_w", 870.0),
            efficiency_curve=psu._convert("efficiency_curve", _parse_curve, TITANIUM_EFFICIENCY, False),
        ),
        rack_pdu=_support_unit(document, "rack_pdu", "pdu", base_dir),
        floor_pdu=floor_pdu,
        ups=_support_unit(document, "ups", "ups", base_dir),
        literal_support_loss=topo.get_bool("literal_support_loss"),
        cap_by_rated=topo.get_bool("cap_by_rated"),
    )

    scheduler = None
    sched = section("scheduler")
    if sched.get_bool("enabled"):
        ladder = sched._convert("ladder", _parse_ladder, DEFAULT_LADDER, False)
        scheduler = SchedulerConfig(
            damping_factor=sched._convert("damping_factor", _parse_damping, 12.0, False),
            ladder=ladder,
            forecast_mode=forecast.get_str("mode", "average").lower(),
            default_rung=governor_from_name(sched.get_str("default_rung", DEFAULT_RUNG)),
            on_negative=sched.get_str("on_negative", "top").lower(),
            on_above_spot=sched.get_str("on_above_spot", "down").lower(),
            otherwise=sched.get_str("otherwise", "default").lower(),
        )
        _check_choice("scheduler.on_negative", scheduler.on_negative, ("top", "up", "hold"))
        _check_choice("scheduler.on_above_spot", scheduler.on_above_spot, ("down", "bottom", "hold"))
        _check_choice("scheduler.otherwise", scheduler.otherwise, ("default", "hold"))
        _check_choice("forecast.mode", scheduler.forecast_mode, ("first", "last", "average"))

    tariffs = []
    tariff_section = section("tariffs")
    for label in ("low", "mid", "high"):
        price = tariff_section.get_float(f"{label}_eur_mwh")
        if price is not None:
            tariffs.append(OnDemandTariff(label=label, price=price))

    procurement = ProcurementStrategy(
        kind=market.get_str("procurement", "base_load").lower(),
        q=market.get_float("quantile_q", 1.0),
        s=market.get_float("scalar_s", 1.0),
    )
    _check_choice("market.procurement", procurement.kind, ("base_load", "quantile_scalar", "price_aware"))
    price_system = market.get_str("price_system", "two").lower()
    _check_choice("market.price_system", price_system, ("one", "two"))
    aa_mode = forecast.get_str("aa_mode", "literal").lower()
    _check_choice("forecast.aa_mode", aa_mode, ("literal", "conjunction"))
    power_source = power.get_str("source", "model").lower()
    _check_choice("power_model.source", power_source, ("model", "pstate"))

    output_dir = run.get_str("output_dir", "out")
    if not Path(output_dir).is_absolute():
        output_dir = str(base_dir / output_dir)

    return ScenarioConfig(
        trace_path=trace.get_path("path", required=True),
        trace_interval=trace.get_int("interval_s"),
        vm_cap_mhz=trace.get_float("vm_cap_mhz"),
        machine=machine_spec,
        hosts=section("fleet").get_int("hosts"),
        topology=topology,
        policy=policy,
        governor=governor_from_name(dvfs.get_str("governor", "performance")),
        power_source=power_source,
        scheduler=scheduler,
        spot_path=market.get_path("spot_path"),
        imbalance_path=market.get_path("imbalance_path"),
        inference_path=forecast.get_path("inference_path"),
        synthetic_sigma=forecast.get_float("synthetic_sigma_eur_mwh"),
        procurement=procurement,
        price_system=price_system,
        tariffs=tuple(tariffs),
        aa_mode=aa_mode,
        output_dir=output_dir,
        seed=run.get_int("seed", 0),
    )


def _check_choice(key: str, value: str, choices: Tuple[str, ...]) -> None:
    if value not in choices:
        raise ConfigError(f"Invalid value for {key}: {value!r} (expected one of {', '.join(choices)})")


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Read a scenario file.

    Raises:
        ConfigError: If the file is missing, unparseable or invalid
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse {path}: {e}")
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must hold a mapping of sections, got {type(document).__name__}")
    unknown = sorted(set(map(str, document)) - set(SECTIONS))
    if unknown:
        logging.warning(f"⚠️ Ignoring unknown sections in {path}: {', '.join(unknown)}")

    try:
        config = parse_scenario(document, path.parent)
    except ConfigError:
        raise
    except PowerMarketError as e:
        raise ConfigError(f"{path}: {e}")
    logging.info(f"🧾 Loaded scenario {path}")
    return config
