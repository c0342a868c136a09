"""Discrete-event simulation core.

Time advances on an integer nanosecond clock through a binary heap of
events. The capacitor is brought up to date at the top of every dispatch,
so threshold crossings are detected before any event logic runs, and
crossing times predicted in closed form get their own wake-up events.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable

from .device import CycleRecord, Gateway, LorawanDevice
from .energy import (
    Capacitor,
    CapacitorParams,
    LoadProfile,
    Resistance,
    TraceRecorder,
    harvester_resistance,
)
from .harvester import (
    ConstantHarvester,
    HarvestSource,
    RandomHarvester,
    TraceExhaustedError,
    load_trace,
)
from .lorawan import DEFAULT_CURRENTS_A, DeviceState, LorawanParams

_NS_PER_S = 1_000_000_000

HARVESTER_KINDS = ("constant", "trace", "random")
GUARD_HORIZONS = ("tx", "cycle")


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation run."""

    # storage
    capacitance_f: float = 0.01
    rail_voltage_v: float = 3.3
    max_voltage_v: float = 3.3
    v_th_low_v: float = 1.8
    v_th_high_v: float = 3.0
    initial_voltage_v: float = 3.3
    update_interval_s: float = 1.0
    # harvesting
    harvester: str = "constant"
    power_w: float = 0.001
    trace_file: str | None = None
    distribution: str = "uniform"
    low_w: float = 0.0
    high_w: float = 0.002
    mean_w: float = 0.001
    harvest_update_period_s: float = 1.0
    # radio
    data_rate: int = 3
    bandwidth_hz: float = 125_000.0
    confirmed: bool = False
    ul_payload_bytes: int = 10
    dl_payload_bytes: int = 0
    mac_overhead_bytes: int = 13
    rx1_delay_s: float = 1.0
    rx2_delay_s: float = 2.0
    rx_window_symbols: int = 8
    rx2_window_symbols: int | None = None
    turn_on_s: float = 0.3
    standby_brief_s: float = 0.01
    max_transmissions: int = 1
    ul_duty_cycle: float = 0.01
    dl_duty_cycle: float = 0.10
    # consumption per device state
    off_a: float = DEFAULT_CURRENTS_A[DeviceState.OFF]
    turn_on_a: float = DEFAULT_CURRENTS_A[DeviceState.TURN_ON]
    sleep_a: float = DEFAULT_CURRENTS_A[DeviceState.SLEEP]
    tx_a: float = DEFAULT_CURRENTS_A[DeviceState.TX]
    idle_a: float = DEFAULT_CURRENTS_A[DeviceState.IDLE]
    standby_a: float = DEFAULT_CURRENTS_A[DeviceState.STANDBY]
    rx_a: float = DEFAULT_CURRENTS_A[DeviceState.RX]
    # traffic
    packet_period_s: float = 60.0
    first_packet_s: float | None = None
    generate_while_off: bool = True
    # run control
    duration_s: float = 3600.0
    seed: int = 1
    guard_enabled: bool = True
    guard_horizon: str = "tx"
    trace: bool = False

    def currents(self) -> dict[DeviceState, float]:
        return {
            DeviceState.OFF: self.off_a,
            DeviceState.TURN_ON: self.turn_on_a,
            DeviceState.SLEEP: self.sleep_a,
            DeviceState.TX: self.tx_a,
            DeviceState.IDLE: self.idle_a,
            DeviceState.STANDBY: self.standby_a,
            DeviceState.RX: self.rx_a,
        }


@dataclass(order=True)
class Event:
    time_ns: int
    seq: int
    action: Callable[[], None] = field(compare=False, repr=False)
    cancelled: bool = field(default=False, compare=False)


@dataclass
class Metrics:
    """Counters and totals accumulated over one run."""

    generated: int = 0
    delivered_ul: int = 0
    acked: int = 0
    skipped_by_guard: int = 0
    depletion_events: int = 0
    off_time_s: float = 0.0
    final_voltage_v: float = 0.0
    ul_airtime_s: float = 0.0
    max_ul_airtime_s: float = 0.0
    valid: bool = True
    cycles: list[CycleRecord] = field(default_factory=list)
    trace: TraceRecorder | None = None


def success_probability(metrics: Metrics, kind: str) -> float:
    """Fraction of generated packets that completed a cycle of ``kind``."""
    if metrics.generated == 0:
        raise ValueError("no packets were generated")
    if kind == "UL":
        return metrics.delivered_ul / metrics.generated
    if kind == "UL+DL":
        return metrics.acked / metrics.generated
    raise ValueError(f"unknown cycle kind {kind!r}")


RESULTS_HEADER = (
    "C_farads,P_harvest_W,data_rate,period_s,confirmed,"
    "generated,delivered,acked,psucc_ul,psucc_uldl"
)


def results_row(config: ScenarioConfig, metrics: Metrics) -> str:
    """One CSV line summarising a run, matching RESULTS_HEADER."""
    if metrics.generated:
        p_ul = metrics.delivered_ul / metrics.generated
        p_uldl = metrics.acked / metrics.generated
    else:
        p_ul = p_uldl = 0.0
    return (
        f"{config.capacitance_f:.9g},{config.power_w:.9g},{config.data_rate},"
        f"{config.packet_period_s:.9g},{int(config.confirmed)},"
        f"{metrics.generated},{metrics.delivered_ul},{metrics.acked},"
        f"{p_ul:.6f},{p_uldl:.6f}"
    )


def _noop() -> None:
    pass


def _scenario_problems(config: ScenarioConfig) -> list[str]:
    problems = []
    if config.harvester not in HARVESTER_KINDS:
        problems.append(f"harvester must be one of {HARVESTER_KINDS}")
    if config.harvester == "constant" and config.power_w < 0:
        problems.append("power_w must be non-negative")
    if config.harvester == "trace" and not config.trace_file:
        problems.append("trace_file is required for the trace harvester")
    if config.harvester == "random":
        if config.distribution not in ("uniform", "exponential"):
            problems.append("distribution must be 'uniform' or 'exponential'")
        if not 0 <= config.low_w <= config.high_w:
            problems.append("need 0 <= low_w <= high_w")
        if config.distribution == "exponential" and config.mean_w <= 0:
            problems.append("mean_w must be positive")
        if config.harvest_update_period_s <= 0:
            problems.append("harvest_update_period_s must be positive")
    if config.packet_period_s <= 0:
        problems.append("packet_period_s must be positive")
    if config.first_packet_s is not None and config.first_packet_s < 0:
        problems.append("first_packet_s must be non-negative")
    if config.duration_s <= 0:
        problems.append("duration_s must be positive")
    if config.guard_horizon not in GUARD_HORIZONS:
        problems.append(f"guard_horizon must be one of {GUARD_HORIZONS}")
    for name, amps in (
        ("off_a", config.off_a),
        ("turn_on_a", config.turn_on_a),
        ("sleep_a", config.sleep_a),
        ("tx_a", config.tx_a),
        ("idle_a", config.idle_a),
        ("standby_a", config.standby_a),
        ("rx_a", config.rx_a),
    ):
        if amps < 0:
            problems.append(f"{name} must be non-negative")
    return problems


def capacitor_params(config: ScenarioConfig) -> CapacitorParams:
    if config.max_voltage_v <= 0:
        raise ValueError("max_voltage_v must be positive")
    return CapacitorParams(
        capacitance_f=config.capacitance_f,
        rail_voltage_v=config.rail_voltage_v,
        max_voltage_v=config.max_voltage_v,
        v_th_low_fraction=config.v_th_low_v / config.max_voltage_v,
        v_th_high_fraction=config.v_th_high_v / config.max_voltage_v,
        initial_voltage_v=config.initial_voltage_v,
        update_interval_s=config.update_interval_s,
    )


def lorawan_params(config: ScenarioConfig) -> LorawanParams:
    return LorawanParams(
        data_rate=config.data_rate,
        bandwidth_hz=config.bandwidth_hz,
        confirmed=config.confirmed,
        ul_payload_bytes=config.ul_payload_bytes,
        dl_payload_bytes=config.dl_payload_bytes,
        mac_overhead_bytes=config.mac_overhead_bytes,
        rx1_delay_s=config.rx1_delay_s,
        rx2_delay_s=config.rx2_delay_s,
        rx_window_symbols=config.rx_window_symbols,
        rx2_window_symbols=config.rx2_window_symbols,
        turn_on_s=config.turn_on_s,
        standby_brief_s=config.standby_brief_s,
        max_transmissions=config.max_transmissions,
        ul_duty_cycle=config.ul_duty_cycle,
        dl_duty_cycle=config.dl_duty_cycle,
    )


def _build_harvester(config: ScenarioConfig) -> HarvestSource:
    if config.harvester == "constant":
        return ConstantHarvester(config.power_w)
    if config.harvester == "trace":
        assert config.trace_file is not None
        return load_trace(config.trace_file)
    return RandomHarvester(
        config.distribution,
        seed=config.seed + 101,
        update_period_s=config.harvest_update_period_s,
        low_w=config.low_w,
        high_w=config.high_w,
        mean_w=config.mean_w,
    )


def validate_scenario(config: ScenarioConfig) -> list[str]:
    """Every violated constraint in ``config``, one message per problem."""
    problems = _scenario_problems(config)
    try:
        capacitor_params(config)
    except ValueError as exc:
        problems.append(str(exc))
    try:
        lorawan_params(config)
    except ValueError as exc:
        problems.append(str(exc))
    return problems


class Simulator:
    """Runs one scenario to completion and reports its metrics."""

    def __init__(self, config: ScenarioConfig) -> None:
        problems = validate_scenario(config)
        if problems:
            raise ValueError("; ".join(problems))

        self.config = config
        self.cap = Capacitor(capacitor_params(config))
        self.harvester = _build_harvester(config)
        self.currents = config.currents()
        self._profiles = {
            state: LoadProfile(state.value, amps)
            for state, amps in self.currents.items()
        }
        self.metrics = Metrics()
        if config.trace:
            self.metrics.trace = TraceRecorder()
        self.gateway = Gateway()
        self.device = LorawanDevice(self, lorawan_params(config))
        self.cap.add_depleted_listener(self.device.on_depleted)
        self.cap.add_recharged_listener(self.device.on_recharged)
        self.rng = random.Random(config.seed)
        self.now_ns = 0
        self.r_harv: Resistance = harvester_resistance(
            self.harvester.power_at(0.0), config.rail_voltage_v
        )
        self._heap: list[Event] = []
        self._seq = 0
        self._crossing_event: Event | None = None
        self._last_record_key: tuple[int, DeviceState] | None = None

    @property
    def now_s(self) -> float:
        return self.now_ns / _NS_PER_S

    # -- scheduling --------------------------------------------------------

    def schedule_at_ns(self, time_ns: int, action: Callable[[], None]) -> Event:
        event = Event(max(time_ns, self.now_ns), self._seq, action)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def schedule_in(self, delay_s: float, action: Callable[[], None]) -> Event:
        return self.schedule_at_ns(
            self.now_ns + round(delay_s * _NS_PER_S), action
        )

    def schedule_at_s(self, time_s: float, action: Callable[[], None]) -> Event:
        return self.schedule_at_ns(round(time_s * _NS_PER_S), action)

    def cancel(self, event: Event) -> None:
        event.cancelled = True

    # -- state and bookkeeping ----------------------------------------------

    def set_device_state(self, state: DeviceState) -> None:
        self.device.state = state
        self._record_trace()

    def _advance(self) -> None:
        profile = self._profiles[self.device.state]
        self.cap.update(self.now_s, profile, self.r_harv)

    def _record_trace(self) -> None:
        recorder = self.metrics.trace
        if recorder is None:
            return
        key = (self.now_ns, self.device.state)
        if key == self._last_record_key:
            return
        self._last_record_key = key
        recorder.record(self.now_s, self.cap.voltage_v, self.device.state.value)

    def _reschedule_crossing(self) -> None:
        if self._crossing_event is not None:
            self._crossing_event.cancelled = True
            self._crossing_event = None
        profile = self._profiles[self.device.state]
        t_cross = self.cap.next_crossing(profile, self.r_harv)
        if t_cross is None:
            return
        delay_ns = max(1, round(t_cross * _NS_PER_S))
        self._crossing_event = self.schedule_at_ns(self.now_ns + delay_ns, _noop)

    # -- recurring drivers ---------------------------------------------------

    def _on_periodic(self) -> None:
        self.schedule_in(self.config.update_interval_s, self._on_periodic)

    def _on_generate(self) -> None:
        self.schedule_in(self.config.packet_period_s, self._on_generate)
        self.device.on_generate()

    def _on_harvest_change(self) -> None:
        power = self.harvester.power_at(self.now_s)
        self.r_harv = harvester_resistance(power, self.config.rail_voltage_v)
        self._chain_harvest_change(self.now_s)

    def _chain_harvest_change(self, after_s: float) -> None:
        nxt = self.harvester.next_change_after(after_s)
        if nxt is not None and nxt <= self.config.duration_s:
            self.schedule_at_s(nxt, self._on_harvest_change)
        else:
            # Raises when an input trace ends before the run does.
            self.harvester.power_at(self.config.duration_s)

    # -- main loop ------------------------------------------------------------

    def _dispatch(self, event: Event) -> None:
        moved = event.time_ns != self.now_ns
        self.now_ns = event.time_ns
        self._advance()
        if moved:
            self._record_trace()
        if not event.cancelled:
            event.action()
        self._reschedule_crossing()

    def run(self) -> Metrics:
        config = self.config
        duration_ns = round(config.duration_s * _NS_PER_S)
        try:
            self._record_trace()
            self.schedule_in(config.update_interval_s, self._on_periodic)
            self._chain_harvest_change(0.0)
            first = config.first_packet_s
            if first is None:
                first = self.rng.uniform(0.0, config.packet_period_s)
            self.schedule_at_s(first, self._on_generate)
            self._reschedule_crossing()
            while self._heap:
                event = heapq.heappop(self._heap)
                if event.time_ns >= duration_ns:
                    break
                self._dispatch(event)
            self.now_ns = duration_ns
            self._advance()
            self._record_trace()
        except TraceExhaustedError:
            self.metrics.valid = False
        self.device.finalize(self.now_s)
        self.metrics.final_voltage_v = self.cap.voltage_v
        self.metrics.ul_airtime_s = self.device.ul_budget.airtime_total_s
        self.metrics.max_ul_airtime_s = self.device.ul_budget.max_airtime_s
        return self.metrics


def run_scenario(config: ScenarioConfig) -> Metrics:
    return Simulator(config).run()
