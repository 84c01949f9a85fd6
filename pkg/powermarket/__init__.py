from .base import (
    PowerMarketError,
    ConfigError,
    DataError,
    DomainError,
    FetchError,
    RateLimitError,
    SimulationError,
    validate_fraction,
    validate_non_negative
)
from .types import (
    MachineSpec,
    PowerModelSpec,
    PowerTopology,
    PriceBook,
    ProcurementStrategy,
    RunReport,
    ScalingPolicy,
    ScenarioConfig,
    SchedulerConfig,
    Settlement,
    Trace
)
from .power_models import eval_power, interpolate_power, load_pstate_table
from .machine import load_trace, size_fleet, size_memory, step_host
from .dvfs import drive_pstate, governor_propose
from .power_chain import facility_power, maxmin_share, psu_output_within, psu_step
from .market import load_price_book, schedule_day_ahead, settle
from .forecast import aa_sweep, agreement_accuracy, load_inferences, synth_forecast
from .scheduler import damp, decide, sweet_spot
from .engine import Simulator, decompose_loads, efficiency_metrics, metrics, run
from .config import load_scenario
from .reports import plot_data, read_report, write_report
from .sweeps import aa_eval, parse_range, sweep_damping, sweep_procurement, sweep_sigma
from .synthetic import write_scenario
from .fetcher import PriceFetcher

__all__ = [
    'PowerMarketError',
    'ConfigError',
    'DataError',
    'DomainError',
    'FetchError',
    'RateLimitError',
    'SimulationError',
    'validate_fraction',
    'validate_non_negative',
    'MachineSpec',
    'PowerModelSpec',
    'PowerTopology',
    'PriceBook',
    'ProcurementStrategy',
    'RunReport',
    'ScalingPolicy',
    'ScenarioConfig',
    'SchedulerConfig',
    'Settlement',
    'Trace',
    'eval_power',
    'interpolate_power',
    'load_pstate_table',
    'load_trace',
    'size_fleet',
    'size_memory',
    'step_host',
    'drive_pstate',
    'governor_propose',
    'facility_power',
    'maxmin_share',
    'psu_output_within',
    'psu_step',
    'load_price_book',
    'schedule_day_ahead',
    'settle',
    'aa_sweep',
    'agreement_accuracy',
    'load_inferences',
    'synth_forecast',
    'damp',
    'decide',
    'sweet_spot',
    'Simulator',
    'decompose_loads',
    'efficiency_metrics',
    'metrics',
    'run',
    'load_scenario',
    'plot_data',
    'read_report',
    'write_report',
    'aa_eval',
    'parse_range',
    'sweep_damping',
    'sweep_procurement',
    'sweep_sigma',
    'write_scenario',
    'PriceFetcher'
]
