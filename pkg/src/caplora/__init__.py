"""Discrete-event simulation of battery-less LoRaWAN devices running from a
harvester-charged capacitor: closed-form RC energy model, Class A MAC with
duty cycling and a pre-transmission energy guard, and analysis helpers for
minimum-capacitance and packet-success studies."""

from .analysis import (
    CycleSpec,
    MinCapacitanceRow,
    SweepGrid,
    cycle_spec,
    engine_cycle_feasible,
    expand_grid,
    min_capacitance,
    min_capacitance_for_target,
    min_voltage_over_cycle,
    mincap_table,
    peak_success_capacitance,
    run_sweep,
    success_curve,
)
from .config import ConfigError, dump_config, parse_config
from .device import (
    CycleOutcome,
    CycleRecord,
    DlReply,
    Gateway,
    LorawanDevice,
    post_tx_sequence,
    smart_tx_guard,
)
from .energy import (
    OPEN_CIRCUIT,
    Capacitor,
    CapacitorParams,
    LoadProfile,
    TraceRecorder,
    crossing_time,
    equivalent_resistance,
    harvester_resistance,
    load_energy_joules,
    load_resistance,
    min_voltage_over_segments,
    propagate_voltage,
    steady_state_voltage,
)
from .engine import (
    Metrics,
    RESULTS_HEADER,
    ScenarioConfig,
    Simulator,
    results_row,
    run_scenario,
    success_probability,
    validate_scenario,
)
from .harvester import (
    ConstantHarvester,
    HarvestSample,
    RandomHarvester,
    TraceExhaustedError,
    TraceFormatError,
    TraceHarvester,
    load_trace,
)
from .lorawan import (
    DEFAULT_CURRENTS_A,
    DeviceState,
    DutyCycleBudget,
    LorawanParams,
    data_rate_to_sf,
    rx_window_duration,
    symbol_duration,
    time_on_air,
)

__version__ = "0.1.0"

__all__ = [
    "Capacitor",
    "CapacitorParams",
    "ConfigError",
    "ConstantHarvester",
    "CycleOutcome",
    "CycleRecord",
    "CycleSpec",
    "DEFAULT_CURRENTS_A",
    "DeviceState",
    "DlReply",
    "DutyCycleBudget",
    "Gateway",
    "HarvestSample",
    "LoadProfile",
    "LorawanDevice",
    "LorawanParams",
    "Metrics",
    "MinCapacitanceRow",
    "OPEN_CIRCUIT",
    "RESULTS_HEADER",
    "RandomHarvester",
    "ScenarioConfig",
    "Simulator",
    "SweepGrid",
    "TraceExhaustedError",
    "TraceFormatError",
    "TraceHarvester",
    "TraceRecorder",
    "crossing_time",
    "cycle_spec",
    "data_rate_to_sf",
    "dump_config",
    "engine_cycle_feasible",
    "equivalent_resistance",
    "expand_grid",
    "harvester_resistance",
    "load_energy_joules",
    "load_resistance",
    "load_trace",
    "min_capacitance",
    "min_capacitance_for_target",
    "min_voltage_over_cycle",
    "min_voltage_over_segments",
    "mincap_table",
    "parse_config",
    "peak_success_capacitance",
    "post_tx_sequence",
    "propagate_voltage",
    "results_row",
    "run_scenario",
    "run_sweep",
    "rx_window_duration",
    "smart_tx_guard",
    "steady_state_voltage",
    "success_curve",
    "success_probability",
    "symbol_duration",
    "time_on_air",
    "validate_scenario",
    "__version__",
]
