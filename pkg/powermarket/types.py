import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from .base import ConfigError


PowerModelVariant = Literal[
    "constant",
    "linear",
    "square",
    "cubic",
    "sqrt",
    "mse",
    "interpolation",
    "asymptotic",
    "asymptotic_dvfs"
]
Governor = Literal["performance", "powersave", "ondemand", "conservative"]
UnitKind = Literal["ups", "pdu"]
PowerSource = Literal["model", "pstate"]
PriceSystem = Literal["one", "two"]
ProcurementKind = Literal["base_load", "quantile_scalar", "price_aware"]
TariffLabel = Literal["low", "mid", "high"]
InferenceMode = Literal["first", "last", "average"]
AaMode = Literal["literal", "conjunction"]
NegativeAction = Literal["top", "up", "hold"]
AboveSpotAction = Literal["down", "bottom", "hold"]
OtherwiseAction = Literal["default", "hold"]

PowerTable = Tuple[Tuple[float, float], ...]


# Power models

@dataclass(frozen=True)
class PowerModelSpec:
    variant: PowerModelVariant
    p_idle: float = 0.0
    p_max: float = 0.0
    constant: float = 0.0
    r: float = 1.4
    a: Optional[float] = None
    table: PowerTable = ()

    def __post_init__(self):
        if self.variant in ("constant", "interpolation"):
            pass
        elif self.p_idle > self.p_max:
            raise ConfigError(f"p_idle ({self.p_idle}) must not exceed p_max ({self.p_max})")
        if self.r <= 0:
            raise ConfigError(f"r must be positive, got {self.r}")
        if self.variant in ("asymptotic", "asymptotic_dvfs"):
            if self.a is None or self.a <= 0:
                raise ConfigError(f"{self.variant} power model needs a positive a, got {self.a}")
        if self.variant == "interpolation":
            if len(self.table) < 2:
                raise ConfigError("interpolation table needs at least two knots")
            usages = [u for u, _ in self.table]
            if any(later <= earlier for earlier, later in zip(usages, usages[1:])):
                raise ConfigError("interpolation table must be strictly increasing in usage")
            if usages[0] != 0.0 or usages[-1] != 1.0:
                raise ConfigError("interpolation table must cover usage 0 and 1")


@dataclass(frozen=True)
class PState:
    index: int
    frequency: float
    voltage: float
    power: float


# Machine

@dataclass(frozen=True)
class TraceRecord:
    timestamp: int
    vm_id: str
    cpu_demand: float
    memory_demand: float


@dataclass(frozen=True)
class Trace:
    """Tick-aligned demand matrices (zero-order hold between samples).

    Rows are ticks, columns are VMs in first-appearance order.
    """
    timestamps: np.ndarray
    vm_ids: Tuple[str, ...]
    cpu: np.ndarray
    memory: np.ndarray
    interval: int

    @property
    def tick_count(self) -> int:
        return len(self.timestamps)

    @property
    def psi_d(self) -> float:
        """Maximum instant aggregate CPU demand (MHz)."""
        return float(self.cpu.sum(axis=1).max()) if self.tick_count else 0.0

    @property
    def psi_m(self) -> float:
        """Maximum instant aggregate memory request (MB)."""
        return float(self.memory.sum(axis=1).max()) if self.tick_count else 0.0


@dataclass(frozen=True)
class MachineSpec:
    core_count: int
    max_frequency: float
    memory_unit_size: float
    pstates: Tuple[PState, ...]
    power_model: PowerModelSpec

    def __post_init__(self):
        if self.core_count < 1:
            raise ConfigError(f"core_count must be >= 1, got {self.core_count}")
        if self.max_frequency <= 0:
            raise ConfigError(f"max_frequency must be positive, got {self.max_frequency}")
        if self.memory_unit_size <= 0:
            raise ConfigError(f"memory_unit_size must be positive, got {self.memory_unit_size}")

    @property
    def capacity(self) -> float:
        return self.core_count * self.max_frequency


@dataclass
class HostState:
    host_id: int
    core_count: int
    max_frequency: float
    current_frequency: float
    demands: Dict[str, float] = field(default_factory=dict)
    cumulative_demand: float = 0.0
    cumulative_granted: float = 0.0
    cumulative_overcommit: float = 0.0
    cumulative_idle_time: float = 0.0
    wall_time: float = 0.0
    cpu_time: float = 0.0
    n_run: int = 0
    n_queued: int = 0
    n_blocked: int = 0
    last_usage: float = 0.0

    @property
    def capacity(self) -> float:
        return self.core_count * self.max_frequency


class StepResult(NamedTuple):
    granted: float
    overcommit: float
    usage: float


# DVFS

@dataclass
class ScalingPolicy:
    f_min: float
    f_max: float
    target: float
    governor: Governor = "ondemand"
    up_threshold: float = 80.0
    step_fraction: float = 0.05
    down_threshold: Optional[float] = None

    def __post_init__(self):
        if self.down_threshold is None:
            self.down_threshold = self.up_threshold - 20.0
        if not 0 < self.f_min <= self.target <= self.f_max:
            raise ConfigError(f"need 0 < f_min <= target <= f_max, got {self.f_min}, {self.target}, {self.f_max}")
        if not 0 < self.up_threshold <= 100:
            raise ConfigError(f"up_threshold must lie in (0, 100], got {self.up_threshold}")
        if not 0 < self.step_fraction <= 1:
            raise ConfigError(f"step_fraction must lie in (0, 1], got {self.step_fraction}")
        if self.down_threshold > self.up_threshold:
            raise ConfigError("down_threshold must not exceed up_threshold")


@dataclass
class PStateDriver:
    """Package-level P-state selector. Table is kept sorted P0 (fastest) first."""
    pstates: Tuple[PState, ...]
    mode: Literal["discrete"] = "discrete"
    clamps: int = 0

    def __post_init__(self):
        if not self.pstates:
            raise ConfigError("P-state table must not be empty")
        frequencies = [p.frequency for p in self.pstates]
        if len(set(frequencies)) != len(frequencies):
            raise ConfigError("P-state frequencies must be unique")
        self.pstates = tuple(sorted(self.pstates, key=lambda p: -p.frequency))


# Power chain

# 80 Plus Titanium: (load-percent upper bound, efficiency percent), first match wins
TITANIUM_EFFICIENCY: Tuple[Tuple[float, float], ...] = (
    (10.0, 90.0),
    (20.0, 94.0),
    (50.0, 96.0),
    (100.0, 91.0),
)


@dataclass(frozen=True)
class PsuSpec:
    rated_output: float = 870.0
    efficiency_curve: Tuple[Tuple[float, float], ...] = TITANIUM_EFFICIENCY

    def __post_init__(self):
        if self.rated_output <= 0:
            raise ConfigError(f"PSU rated output must be positive, got {self.rated_output}")
        if not self.efficiency_curve:
            raise ConfigError("PSU efficiency curve must not be empty")
        bounds = [bound for bound, _ in self.efficiency_curve]
        if any(later <= earlier for earlier, later in zip(bounds, bounds[1:])):
            raise ConfigError("PSU efficiency bounds must be strictly increasing")
        for _, efficiency in self.efficiency_curve:
            if not 0 < efficiency <= 100:
                raise ConfigError(f"PSU efficiency must lie in (0, 100], got {efficiency}")


@dataclass(frozen=True)
class SupportUnitSpec:
    kind: UnitKind
    nameplate_loss: float
    tare_loss: float
    rated_power: float

    def __post_init__(self):
        if not 0 <= self.tare_loss <= self.nameplate_loss < 1:
            raise ConfigError(
                f"{self.kind} needs 0 <= tare_loss <= nameplate_loss < 1, "
                f"got tare={self.tare_loss}, nameplate={self.nameplate_loss}"
            )
        if self.rated_power <= 0:
            raise ConfigError(f"{self.kind} rated_power must be positive, got {self.rated_power}")

    @property
    def load_coefficient(self) -> float:
        """alpha for a UPS, beta for a PDU."""
        return self.nameplate_loss - self.tare_loss

    @property
    def tare_power(self) -> float:
        return self.tare_loss * self.rated_power


@dataclass(frozen=True)
class PowerTopology:
    hosts_per_rack_pdu: int
    pdus_per_ups: int
    pue: float
    rack_pdu: SupportUnitSpec
    ups: SupportUnitSpec
    psu: PsuSpec = field(default_factory=PsuSpec)
    rack_pdus_per_floor_pdu: int = 0
    floor_pdu: Optional[SupportUnitSpec] = None
    ups_count: Optional[int] = None
    literal_support_loss: bool = False
    cap_by_rated: bool = False

    def __post_init__(self):
        if self.pue < 1:
            raise ConfigError(f"pue must be >= 1, got {self.pue}")
        if self.hosts_per_rack_pdu < 1 or self.pdus_per_ups < 1:
            raise ConfigError("hosts_per_rack_pdu and pdus_per_ups must be >= 1")
        if self.rack_pdus_per_floor_pdu < 0:
            raise ConfigError("rack_pdus_per_floor_pdu must be >= 0")
        if self.rack_pdus_per_floor_pdu and self.floor_pdu is None:
            raise ConfigError("a floor PDU tier needs a floor_pdu spec")
        if self.ups_count is not None and self.ups_count < 1:
            raise ConfigError("ups_count must be >= 1")
        if self.rack_pdu.kind != "pdu" or (self.floor_pdu is not None and self.floor_pdu.kind != "pdu"):
            raise ConfigError("PDU tiers need kind 'pdu'")
        if self.ups.kind != "ups":
            raise ConfigError("UPS tier needs kind 'ups'")


class PsuStep(NamedTuple):
    eta_l: float
    eta_e: float
    loss_power: float
    energy_loss: float
    overloaded: bool


class PowerBreakdown(NamedTuple):
    """Facility power for one tick, in watts."""
    servers_w: float
    psu_loss_w: float
    pdu_loss_w: float
    ups_loss_w: float
    secondary_w: float
    total_w: float
    curtailed_w: float = 0.0
    secondary_clamped: bool = False
    psu_overloads: int = 0


# Market

@dataclass(frozen=True)
class PriceBook:
    """Spot prices per hour start and imbalance prices per ISP start, all UTC."""
    spot: pd.Series = field(default_factory=lambda: pd.Series(dtype=float, index=pd.DatetimeIndex([], tz="UTC")))
    imbalance: pd.DataFrame = field(
        default_factory=lambda: pd.DataFrame(
            {"shortage": pd.Series(dtype=float), "surplus": pd.Series(dtype=float), "regulation_state": pd.Series(dtype=int)},
            index=pd.DatetimeIndex([], tz="UTC"),
        )
    )
    isp_length: int = 900


@dataclass(frozen=True)
class ProcurementStrategy:
    kind: ProcurementKind = "base_load"
    q: float = 1.0
    s: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ConfigError(f"quantile q must lie in [0, 1], got {self.q}")
        if not 0.97 - 1e-9 <= self.s <= 1.30 + 1e-9:
            raise ConfigError(f"scalar s must lie in [0.97, 1.30], got {self.s}")


@dataclass(frozen=True)
class OnDemandTariff:
    label: TariffLabel
    price: float

    def __post_init__(self):
        if self.price <= 0:
            raise ConfigError(f"tariff {self.label} price must be positive, got {self.price}")


@dataclass(frozen=True)
class SettlementLine:
    isp_start: pd.Timestamp
    scheduled: float
    delivered: float
    shortage: float
    surplus: float
    cost: float


@dataclass(frozen=True)
class Settlement:
    system: PriceSystem
    day_ahead_cost: float
    shortage_cost: float
    surplus_refund: float
    lines: Tuple[SettlementLine, ...]

    @property
    def imbalance_cost(self) -> float:
        return self.shortage_cost - self.surplus_refund

    @property
    def total(self) -> float:
        return self.day_ahead_cost + self.shortage_cost - self.surplus_refund

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "isp_start": [line.isp_start for line in self.lines],
                "scheduled_mwh": [line.scheduled for line in self.lines],
                "delivered_mwh": [line.delivered for line in self.lines],
                "shortage_mwh": [line.shortage for line in self.lines],
                "surplus_mwh": [line.surplus for line in self.lines],
                "cost_eur": [line.cost for line in self.lines],
            }
        )


# Forecast

@dataclass(frozen=True)
class IspForecast:
    isp_start: pd.Timestamp
    minute_predictions: Tuple[float, ...]


@dataclass(frozen=True)
class SyntheticPredictor:
    sigma: float
    seed: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")


# Scheduler

@dataclass(frozen=True)
class SchedulerConfig:
    damping_factor: float = 12.0
    ladder: Tuple[Governor, ...] = ("performance", "ondemand", "conservative", "powersave")
    forecast_mode: InferenceMode = "average"
    default_rung: Governor = "ondemand"
    on_negative: NegativeAction = "top"
    on_above_spot: AboveSpotAction = "down"
    otherwise: OtherwiseAction = "default"

    def __post_init__(self):
        if math.isnan(self.damping_factor) or self.damping_factor < 0:
            raise ConfigError(f"damping_factor must be >= 0, got {self.damping_factor}")
        if not self.ladder:
            raise ConfigError("scheduler ladder must not be empty")
        if len(set(self.ladder)) != len(self.ladder):
            raise ConfigError("scheduler ladder entries must be unique")
        if self.default_rung not in self.ladder:
            raise ConfigError(f"default rung {self.default_rung} is not on the ladder")


class DecisionLogEntry(NamedTuple):
    isp_start: object
    forecast_eur_mwh: float
    spot_eur_mwh: float
    branch: str
    rung_before: str
    rung_after: str
    oc_delta_pct: float


@dataclass
class SchedulerState:
    rung: int
    oc_reference: float = 0.0
    decisions: List[DecisionLogEntry] = field(default_factory=list)


# Engine

@dataclass(frozen=True)
class ScenarioConfig:
    trace_path: str
    machine: MachineSpec
    topology: PowerTopology
    policy: ScalingPolicy
    governor: Governor = "performance"
    hosts: Optional[int] = None
    power_source: PowerSource = "model"
    trace_interval: Optional[int] = None
    vm_cap_mhz: Optional[float] = None
    scheduler: Optional[SchedulerConfig] = None
    spot_path: Optional[str] = None
    imbalance_path: Optional[str] = None
    inference_path: Optional[str] = None
    synthetic_sigma: Optional[float] = None
    procurement: ProcurementStrategy = field(default_factory=ProcurementStrategy)
    price_system: PriceSystem = "two"
    tariffs: Tuple[OnDemandTariff, ...] = ()
    aa_mode: AaMode = "literal"
    output_dir: str = "out"
    seed: int = 0


@dataclass
class RunReport:
    ledger: pd.DataFrame
    fleet: pd.DataFrame
    isp: pd.DataFrame
    settlement: pd.DataFrame
    decisions: pd.DataFrame
    totals: Dict[str, float]
    metrics: Dict[str, float]
    base_kw: float
    n_hosts: int
