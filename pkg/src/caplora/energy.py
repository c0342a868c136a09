"""Supercapacitor energy model: an ideal source behind a series resistance feeds
a capacitor in parallel with a resistive load.

All voltages are volts, resistances ohms, capacitances farads, times seconds.
An open circuit (no harvest, or no load) is represented by ``None`` instead of
an infinite resistance so that the limiting forms of the charge equation are
taken analytically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, IO, Iterable, Sequence

Resistance = float | None

OPEN_CIRCUIT: Resistance = None


@dataclass(frozen=True)
class LoadProfile:
    """A named constant-current load, e.g. one radio state."""

    name: str
    current_a: float

    def __post_init__(self) -> None:
        if self.current_a < 0.0:
            raise ValueError(f"load current must be >= 0, got {self.current_a}")


@dataclass(frozen=True)
class CapacitorParams:
    """Static parameters of the storage capacitor and its voltage windows.

    Thresholds are stored as fractions of ``max_voltage_v``; the device turns
    off below the low threshold and back on once the high threshold is reached
    again (hysteresis).
    """

    capacitance_f: float
    rail_voltage_v: float
    max_voltage_v: float
    v_th_low_fraction: float
    v_th_high_fraction: float
    initial_voltage_v: float
    update_interval_s: float = 1.0

    def __post_init__(self) -> None:
        problems = []
        if self.capacitance_f <= 0.0:
            problems.append(f"capacitance_f must be > 0, got {self.capacitance_f}")
        if self.rail_voltage_v <= 0.0:
            problems.append(f"rail_voltage_v must be > 0, got {self.rail_voltage_v}")
        if self.max_voltage_v <= 0.0:
            problems.append(f"max_voltage_v must be > 0, got {self.max_voltage_v}")
        if not 0.0 < self.v_th_low_fraction < 1.0:
            problems.append(
                f"v_th_low_fraction must be in (0, 1), got {self.v_th_low_fraction}"
            )
        if not 0.0 < self.v_th_high_fraction <= 1.0:
            problems.append(
                f"v_th_high_fraction must be in (0, 1], got {self.v_th_high_fraction}"
            )
        if self.v_th_high_fraction <= self.v_th_low_fraction:
            problems.append("v_th_high_fraction must be > v_th_low_fraction")
        if not 0.0 <= self.initial_voltage_v <= self.max_voltage_v:
            problems.append(
                f"initial_voltage_v must be in [0, max_voltage_v], got {self.initial_voltage_v}"
            )
        if self.update_interval_s <= 0.0:
            problems.append(f"update_interval_s must be > 0, got {self.update_interval_s}")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def v_th_low_v(self) -> float:
        return self.v_th_low_fraction * self.max_voltage_v

    @property
    def v_th_high_v(self) -> float:
        return self.v_th_high_fraction * self.max_voltage_v


def harvester_resistance(power_w: float, rail_voltage_v: float) -> Resistance:
    """Series resistance of a harvester delivering ``power_w`` at the rail voltage.

    Zero power means no harvest path at all and yields the open-circuit marker.
    """
    if power_w < 0.0:
        raise ValueError(f"harvested power must be >= 0, got {power_w}")
    if rail_voltage_v <= 0.0:
        raise ValueError(f"rail voltage must be > 0, got {rail_voltage_v}")
    if power_w == 0.0:
        return OPEN_CIRCUIT
    return rail_voltage_v * rail_voltage_v / power_w


def load_resistance(current_a: float, rail_voltage_v: float) -> Resistance:
    """Equivalent resistance of a load absorbing ``current_a`` at the rail voltage."""
    if current_a < 0.0:
        raise ValueError(f"load current must be >= 0, got {current_a}")
    if rail_voltage_v <= 0.0:
        raise ValueError(f"rail voltage must be > 0, got {rail_voltage_v}")
    if current_a == 0.0:
        return OPEN_CIRCUIT
    return rail_voltage_v / current_a


def equivalent_resistance(r_load: Resistance, r_harv: Resistance) -> Resistance:
    """Parallel combination of load and harvester resistances, open-circuit aware."""
    _check_resistance(r_load, "r_load")
    _check_resistance(r_harv, "r_harv")
    if r_load is None and r_harv is None:
        return OPEN_CIRCUIT
    if r_load is None:
        return r_harv
    if r_harv is None:
        return r_load
    return r_load * r_harv / (r_load + r_harv)


def steady_state_voltage(
    r_load: Resistance, r_harv: Resistance, rail_voltage_v: float
) -> float | None:
    """Asymptotic capacitor voltage for a fixed load and harvest.

    Returns ``None`` when both sides are open: the voltage then simply holds.
    """
    r_eq = equivalent_resistance(r_load, r_harv)
    if r_eq is None:
        return None
    if r_harv is None:
        return 0.0
    return rail_voltage_v * r_eq / r_harv


def propagate_voltage(
    v0: float,
    elapsed_s: float,
    r_load: Resistance,
    r_harv: Resistance,
    params: CapacitorParams,
) -> float:
    """Capacitor voltage after ``elapsed_s`` under a fixed load and harvest.

    Closed-form solution of ``C dv/dt = (E - v)/r_harv - v/r_load`` with each
    open side dropping its term. Charging saturates at ``max_voltage_v``.
    """
    if elapsed_s < 0.0:
        raise ValueError(f"elapsed time must be >= 0, got {elapsed_s}")
    if v0 < 0.0:
        raise ValueError(f"voltage must be >= 0, got {v0}")
    v_inf = steady_state_voltage(r_load, r_harv, params.rail_voltage_v)
    if v_inf is None or elapsed_s == 0.0:
        return _clamp(v0, params.max_voltage_v)
    r_eq = equivalent_resistance(r_load, r_harv)
    assert r_eq is not None
    tau = r_eq * params.capacitance_f
    # Convex combination of v0 and v_inf: with both terms non-negative there
    # is no cancellation, so composing many short steps stays accurate even
    # when the voltage is far smaller than the asymptote.
    decay = math.exp(-elapsed_s / tau)
    v = v_inf * -math.expm1(-elapsed_s / tau) + v0 * decay
    return _clamp(v, params.max_voltage_v)


def crossing_time(
    v0: float,
    target_v: float,
    r_load: Resistance,
    r_harv: Resistance,
    params: CapacitorParams,
) -> float | None:
    """Time until the voltage trajectory from ``v0`` reaches ``target_v``.

    Returns ``None`` when the target is never reached (wrong side of the
    trajectory, or an asymptote at or short of the target). The result is
    exact, obtained by inverting the charge equation.
    """
    v_inf = steady_state_voltage(r_load, r_harv, params.rail_voltage_v)
    if v_inf is None or v0 == v_inf:
        return None
    target_v = min(target_v, params.max_voltage_v)
    ratio = (target_v - v_inf) / (v0 - v_inf)
    if ratio <= 0.0 or ratio > 1.0:
        return None
    r_eq = equivalent_resistance(r_load, r_harv)
    assert r_eq is not None
    tau = r_eq * params.capacitance_f
    return -tau * math.log(ratio)


def load_energy_joules(
    v0: float,
    current_a: float,
    duration_s: float,
    r_harv: Resistance,
    params: CapacitorParams,
) -> float:
    """Energy absorbed by a load over ``duration_s``, in closed form.

    The load is the resistance that draws ``current_a`` at the rail voltage,
    so its instantaneous power is ``v(t)^2 / R_L``. Integrating that keeps the
    accounting consistent with the capacitor's stored energy: with no harvest,
    the energy delivered equals the drop in ``C v^2 / 2`` exactly.
    """
    if duration_s < 0.0:
        raise ValueError(f"duration must be >= 0, got {duration_s}")
    if current_a == 0.0 or duration_s == 0.0:
        return 0.0
    r_load = load_resistance(current_a, params.rail_voltage_v)
    assert r_load is not None
    v0 = _clamp(v0, params.max_voltage_v)
    # When the free trajectory would exceed the cap, split at the saturation
    # instant: past it the voltage holds at the maximum, not the exponential.
    v_inf = steady_state_voltage(r_load, r_harv, params.rail_voltage_v)
    if v_inf is not None and v_inf > params.max_voltage_v:
        t_sat = crossing_time(v0, params.max_voltage_v, r_load, r_harv, params)
        if t_sat is not None and t_sat < duration_s:
            head = _exact_energy(v0, t_sat, r_load, r_harv, params)
            vmax = params.max_voltage_v
            tail = vmax * vmax / r_load * (duration_s - t_sat)
            return head + tail
    return _exact_energy(v0, duration_s, r_load, r_harv, params)


def _exact_energy(
    v0: float,
    duration_s: float,
    r_load: float,
    r_harv: Resistance,
    params: CapacitorParams,
) -> float:
    """Integral of v(t)^2 / r_load for an unsaturated exponential segment."""
    v_inf = steady_state_voltage(r_load, r_harv, params.rail_voltage_v)
    assert v_inf is not None
    r_eq = equivalent_resistance(r_load, r_harv)
    assert r_eq is not None
    tau = r_eq * params.capacitance_f
    b = v_inf
    m = v0 - v_inf
    e1 = -math.expm1(-duration_s / tau)
    e2 = -math.expm1(-2.0 * duration_s / tau)
    integral = b * b * duration_s + 2.0 * b * m * tau * e1 + m * m * (tau / 2.0) * e2
    return integral / r_load


def min_voltage_over_segments(
    v0: float,
    segments: Iterable[tuple[float, Resistance]],
    r_harv: Resistance,
    params: CapacitorParams,
) -> float:
    """Minimum voltage reached while playing ``(duration, r_load)`` segments.

    Within one segment the trajectory is monotone toward its asymptote, so the
    minimum over the whole sequence is attained at a segment boundary.
    """
    v = _clamp(v0, params.max_voltage_v)
    v_min = v
    for duration_s, r_load in segments:
        v = propagate_voltage(v, duration_s, r_load, r_harv, params)
        if v < v_min:
            v_min = v
    return v_min


# Voltages closer to a threshold than this are snapped onto it when the
# hysteresis flag flips, so crossings land exactly on the configured level.
_SNAP_TOLERANCE_V = 1e-9


@dataclass
class CapacitorState:
    """Mutable capacitor bookkeeping carried between updates."""

    voltage_v: float
    last_update_s: float
    depleted: bool


class Capacitor:
    """Capacitor state machine with hysteresis and crossing notifications.

    ``update`` propagates the voltage under the profile that was active since
    the previous update. A threshold crossing inside the elapsed interval
    flips the depleted flag and notifies listeners with the analytically
    solved crossing time, not the update time.
    """

    def __init__(self, params: CapacitorParams) -> None:
        self.params = params
        v0 = min(params.initial_voltage_v, params.max_voltage_v)
        self.state = CapacitorState(
            voltage_v=v0,
            last_update_s=0.0,
            depleted=v0 < params.v_th_low_v,
        )
        self.load_energy_j = 0.0
        self._on_depleted: list[Callable[[float], None]] = []
        self._on_recharged: list[Callable[[float], None]] = []

    @property
    def voltage_v(self) -> float:
        return self.state.voltage_v

    def is_depleted(self) -> bool:
        return self.state.depleted

    def add_depleted_listener(self, callback: Callable[[float], None]) -> None:
        self._on_depleted.append(callback)

    def add_recharged_listener(self, callback: Callable[[float], None]) -> None:
        self._on_recharged.append(callback)

    def update(self, now_s: float, profile: LoadProfile, r_harv: Resistance) -> None:
        """Advance to ``now_s`` under ``profile``, firing threshold listeners."""
        st = self.state
        if now_s < st.last_update_s:
            raise ValueError(
                f"update at {now_s} s precedes last update at {st.last_update_s} s"
            )
        if now_s == st.last_update_s:
            return
        elapsed = now_s - st.last_update_s
        r_load = load_resistance(profile.current_a, self.params.rail_voltage_v)
        v_prev = st.voltage_v
        self.load_energy_j += load_energy_joules(
            v_prev, profile.current_a, elapsed, r_harv, self.params
        )
        v_new = propagate_voltage(v_prev, elapsed, r_load, r_harv, self.params)
        st.voltage_v = v_new
        st.last_update_s = now_s
        if not st.depleted and v_new <= self.params.v_th_low_v and v_new <= v_prev:
            t_cross = crossing_time(
                v_prev, self.params.v_th_low_v, r_load, r_harv, self.params
            )
            when = st.last_update_s - elapsed + t_cross if t_cross is not None else now_s
            if abs(v_new - self.params.v_th_low_v) <= _SNAP_TOLERANCE_V:
                st.voltage_v = self.params.v_th_low_v
            st.depleted = True
            for callback in self._on_depleted:
                callback(when)
        elif st.depleted and v_new >= self.params.v_th_high_v and v_new >= v_prev:
            t_cross = crossing_time(
                v_prev, self.params.v_th_high_v, r_load, r_harv, self.params
            )
            when = st.last_update_s - elapsed + t_cross if t_cross is not None else now_s
            if abs(v_new - self.params.v_th_high_v) <= _SNAP_TOLERANCE_V:
                st.voltage_v = self.params.v_th_high_v
            st.depleted = False
            for callback in self._on_recharged:
                callback(when)

    def next_crossing(self, profile: LoadProfile, r_harv: Resistance) -> float | None:
        """Seconds from the last update until the active threshold is crossed."""
        target = (
            self.params.v_th_high_v if self.state.depleted else self.params.v_th_low_v
        )
        r_load = load_resistance(profile.current_a, self.params.rail_voltage_v)
        return crossing_time(self.state.voltage_v, target, r_load, r_harv, self.params)


@dataclass(frozen=True)
class TraceRecord:
    time_s: float
    voltage_v: float
    state: str


@dataclass
class TraceRecorder:
    """Collects timestamped voltage samples and writes them as CSV."""

    records: list[TraceRecord] = field(default_factory=list)

    def record(self, time_s: float, voltage_v: float, state: str) -> None:
        self.records.append(TraceRecord(time_s, voltage_v, state))

    def write_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["time_s", "voltage_V", "state"])
        for rec in self.records:
            writer.writerow([f"{rec.time_s:.9f}", f"{rec.voltage_v:.9f}", rec.state])


def _clamp(v: float, max_voltage_v: float) -> float:
    if v < 0.0:
        return 0.0
    if v > max_voltage_v:
        return max_voltage_v
    return v


def _check_resistance(r: Resistance, name: str) -> None:
    if r is not None and r <= 0.0:
        raise ValueError(f"{name} must be > 0 or the open-circuit marker, got {r}")
