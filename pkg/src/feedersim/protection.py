"""
Building-level motor protection automata.

P1 (electronic relay), P4 (contactor) and P5 (BMS) share one undervoltage
trip/reconnect automaton differing only in settings.  P2 is a definite-time
overcurrent element that never recloses, P3 a first-order thermal replica
that heats while the motor is stalled.  A device is disconnected while any
of its protections asserts trip.

Every step function is pure: it takes a state value and returns a new one.
The ``*Bank`` classes run the same automata over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

CYCLE = 1.0 / 60.0
# Timers are sums of float steps; a delay counts as exceeded only past this
# slack so that e.g. 500 steps of 1 ms do not already exceed 0.5 s.
TIMER_SLACK = 1e-9


class ProtectionType(str, Enum):
    P1 = "P1"  # electronic relay
    P2 = "P2"  # current overload
    P3 = "P3"  # thermal
    P4 = "P4"  # contactor
    P5 = "P5"  # building management system

    @property
    def voltage_dependent(self) -> bool:
        return self in VOLTAGE_TYPES


VOLTAGE_TYPES = frozenset({ProtectionType.P1, ProtectionType.P4, ProtectionType.P5})


@dataclass(frozen=True)
class VoltageProtectionParams:
    V_tr: float
    T_tr: float
    V_rec: float
    T_rec: float
    max_trip_count: int = 1
    activated: bool = True
    work_time: float = 0.0

    def __post_init__(self):
        if self.V_rec < self.V_tr:
            raise ValueError(f"V_rec={self.V_rec} below V_tr={self.V_tr}")
        if self.T_tr < 0 or self.T_rec < 0:
            raise ValueError("delays must be non-negative")
        if self.max_trip_count < 1:
            raise ValueError("max_trip_count must be >= 1")


@dataclass(frozen=True)
class ProtectionState:
    trip_timer: float = 0.0
    rec_timer: float = 0.0
    trip_counter: int = 0
    prot_trip: bool = False


def step_voltage_protection(p: VoltageProtectionParams, s: ProtectionState, v_measured: float,
                            t_now: float, dt: float) -> ProtectionState:
    """One evaluation of the undervoltage trip/reconnect automaton.

    The reconnection timer only carries meaning while tripped; it is cleared
    whenever the step ends untripped or with the trip timer running.  This
    does not change any trip decision.
    """
    if not p.activated or t_now < p.work_time - TIMER_SLACK:
        return s
    trip_timer, rec_timer = s.trip_timer, s.rec_timer
    counter, tripped = s.trip_counter, s.prot_trip

    if v_measured < p.V_tr:
        trip_timer += dt
        if trip_timer > p.T_tr + TIMER_SLACK:
            if not tripped:
                counter += 1
            tripped = True
        else:
            tripped = False
    else:
        trip_timer = 0.0

    if tripped:
        if v_measured > p.V_rec:
            rec_timer += dt
            if rec_timer > p.T_rec + TIMER_SLACK:
                tripped = False
                trip_timer = 0.0
        else:
            rec_timer = 0.0

    if counter >= p.max_trip_count:
        tripped = True
    if not tripped or trip_timer > 0.0:
        rec_timer = 0.0
    return ProtectionState(trip_timer, rec_timer, counter, tripped)


@dataclass(frozen=True)
class OverloadParams:
    I_tr: float = 3.0
    T_tr: float = 0.04
    activated: bool = True
    work_time: float = 0.0

    def __post_init__(self):
        if self.I_tr <= 1:
            raise ValueError("I_tr must exceed 1 pu")
        if self.T_tr < 0:
            raise ValueError("T_tr must be non-negative")

    @property
    def max_trip_count(self) -> int:
        return 1


def step_overload_protection(p: OverloadParams, s: ProtectionState, i_measured: float,
                             dt: float, t_now: float = math.inf) -> ProtectionState:
    """Definite-time overcurrent; the first trip is permanent."""
    if not p.activated or t_now < p.work_time - TIMER_SLACK:
        return s
    trip_timer, counter, tripped = s.trip_timer, s.trip_counter, s.prot_trip
    if i_measured > p.I_tr:
        trip_timer += dt
        if trip_timer > p.T_tr + TIMER_SLACK:
            if not tripped:
                counter += 1
            tripped = True
        else:
            tripped = False
    else:
        trip_timer = 0.0
    if counter >= p.max_trip_count:
        tripped = True
    return ProtectionState(trip_timer, 0.0, counter, tripped)


class HeatingMode(str, Enum):
    STALL = "stall"  # heat only from stalled-motor current
    TOTAL = "total"  # heat from any drawn current


@dataclass(frozen=True)
class ThermalParams:
    T_th: float = 0.15
    T_therm: float = 10.0
    R_stall: float = 0.054
    heating: HeatingMode = HeatingMode.STALL

    def __post_init__(self):
        object.__setattr__(self, "heating", HeatingMode(self.heating))
        if self.T_th <= 0 or self.T_therm <= 0:
            raise ValueError("T_th and T_therm must be positive")


@dataclass(frozen=True)
class ThermalState:
    temperature: float = 0.0
    tripped: bool = False


def step_thermal_protection(p: ThermalParams, s: ThermalState, i_measured: float,
                            is_stalled: bool, dt: float) -> ThermalState:
    """First-order thermal replica driven by R_stall * I**2.

    The lag is discretized exactly for a heating input held over the step,
    so the distance to the input shrinks by exp(-dt/T_therm) per step.
    """
    heats = is_stalled or p.heating is HeatingMode.TOTAL
    u = p.R_stall * i_measured * i_measured if heats else 0.0
    temperature = u + (s.temperature - u) * math.exp(-dt / p.T_therm)
    return ThermalState(temperature, s.tripped or temperature > p.T_th)


def thermal_trip_time(p: ThermalParams, i_stall: float) -> float:
    """Closed-form trip time from cold under constant stall current (inf if never)."""
    u = p.R_stall * i_stall * i_stall
    if u <= p.T_th:
        return math.inf
    return -p.T_therm * math.log(1.0 - p.T_th / u)


def combine_trips(trip_signals) -> bool:
    """OR gate: the first protection to assert trip disconnects the device."""
    signals = list(trip_signals)
    if not signals:
        raise ValueError("at least one trip signal required")
    return any(signals)


@dataclass(frozen=True)
class CapBankParams:
    V_max: float = 1.10
    V_min: float = 1.05

    def __post_init__(self):
        if self.V_max <= self.V_min:
            raise ValueError("V_max must exceed V_min")


class CapStatus(str, Enum):
    ON = "on"
    OFF = "off"


@dataclass(frozen=True)
class CapBankState:
    status: CapStatus = CapStatus.ON


def step_capbank(p: CapBankParams, s: CapBankState, v_op: float) -> CapBankState:
    """Over-voltage trip with hysteresis: off at/above V_max, back on at/below V_min."""
    if v_op >= p.V_max:
        return replace(s, status=CapStatus.OFF)
    if v_op <= p.V_min:
        return replace(s, status=CapStatus.ON)
    return s


# ---------------------------------------------------------------------------
# array forms

class VoltageProtectionBank:
    """``step_voltage_protection`` over parallel arrays of instances."""

    def __init__(self, params: list[VoltageProtectionParams]):
        n = len(params)
        self.V_tr = np.array([p.V_tr for p in params], dtype=float)
        self.T_tr = np.array([p.T_tr for p in params], dtype=float)
        self.V_rec = np.array([p.V_rec for p in params], dtype=float)
        self.T_rec = np.array([p.T_rec for p in params], dtype=float)
        self.max_count = np.array([p.max_trip_count for p in params], dtype=np.int64)
        self.activated = np.array([p.activated for p in params], dtype=bool)
        self.work_time = np.array([p.work_time for p in params], dtype=float)
        self.trip_timer = np.zeros(n)
        self.rec_timer = np.zeros(n)
        self.trip_counter = np.zeros(n, dtype=np.int64)
        self.prot_trip = np.zeros(n, dtype=bool)

    def __len__(self):
        return len(self.V_tr)

    def step(self, v: np.ndarray, t_now: float, dt: float) -> None:
        active = self.activated & (t_now >= self.work_time - TIMER_SLACK)
        below = active & (v < self.V_tr)
        tt = np.where(below, self.trip_timer + dt, self.trip_timer)
        over = below & (tt > self.T_tr + TIMER_SLACK)
        counter = self.trip_counter + (over & ~self.prot_trip)
        tripped = np.where(below, over, self.prot_trip)
        tt = np.where(active & ~below, 0.0, tt)

        checking = active & tripped
        above = checking & (v > self.V_rec)
        rt = np.where(above, self.rec_timer + dt, np.where(checking, 0.0, self.rec_timer))
        reconnect = above & (rt > self.T_rec + TIMER_SLACK)
        tripped = tripped & ~reconnect
        tt = np.where(reconnect, 0.0, tt)

        tripped = tripped | (active & (counter >= self.max_count))
        rt = np.where(active & (~tripped | (tt > 0.0)), 0.0, rt)
        self.trip_timer, self.rec_timer = tt, rt
        self.trip_counter, self.prot_trip = counter, tripped

    def state(self, k: int) -> ProtectionState:
        return ProtectionState(float(self.trip_timer[k]), float(self.rec_timer[k]),
                               int(self.trip_counter[k]), bool(self.prot_trip[k]))


class OverloadBank:
    def __init__(self, params: list[OverloadParams]):
        n = len(params)
        self.I_tr = np.array([p.I_tr for p in params], dtype=float)
        self.T_tr = np.array([p.T_tr for p in params], dtype=float)
        self.activated = np.array([p.activated for p in params], dtype=bool)
        self.work_time = np.array([p.work_time for p in params], dtype=float)
        self.trip_timer = np.zeros(n)
        self.trip_counter = np.zeros(n, dtype=np.int64)
        self.prot_trip = np.zeros(n, dtype=bool)

    def __len__(self):
        return len(self.I_tr)

    def step(self, i_mag: np.ndarray, t_now: float, dt: float) -> None:
        active = self.activated & (t_now >= self.work_time - TIMER_SLACK)
        high = active & (i_mag > self.I_tr)
        tt = np.where(high, self.trip_timer + dt, np.where(active, 0.0, self.trip_timer))
        over = high & (tt > self.T_tr + TIMER_SLACK)
        self.trip_counter = self.trip_counter + (over & ~self.prot_trip)
        tripped = np.where(high, over, self.prot_trip)
        self.prot_trip = tripped | (active & (self.trip_counter >= 1))
        self.trip_timer = tt


class ThermalBank:
    def __init__(self, params: list[ThermalParams]):
        n = len(params)
        self.T_th = np.array([p.T_th for p in params], dtype=float)
        self.T_therm = np.array([p.T_therm for p in params], dtype=float)
        self.R_stall = np.array([p.R_stall for p in params], dtype=float)
        self.total_heating = np.array([p.heating is HeatingMode.TOTAL for p in params], dtype=bool)
        self.temperature = np.zeros(n)
        self.prot_trip = np.zeros(n, dtype=bool)

    def __len__(self):
        return len(self.T_th)

    def step(self, i_mag: np.ndarray, stalled: np.ndarray, dt: float) -> None:
        u = np.where(stalled | self.total_heating, self.R_stall * i_mag * i_mag, 0.0)
        self.temperature = u + (self.temperature - u) * np.exp(-dt / self.T_therm)
        self.prot_trip = self.prot_trip | (self.temperature > self.T_th)
