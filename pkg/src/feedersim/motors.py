"""
Induction motor models for the four composite-load motor categories.

MA, MB and MC are three-phase machines represented by the approximate
equivalent circuit (magnetizing branch at the terminals) with a single
mechanical state.  MD is the single-phase performance model with a latched
stall mode drawing constant-impedance current.

All electrical quantities are per unit on the motor's own base
(rated power, rated voltage).  Scalar functions operate on immutable
``MotorState`` values; ``ThreePhaseBank`` and ``SinglePhaseBank`` hold the
same equations over numpy arrays for the simulation engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

SLIP_MIN = 1e-4
# tolerance on the summed stall timer so 32 steps of 1 ms reach 0.032 s
STALL_SLACK = 1e-9


class MotorType(str, Enum):
    MA = "MA"
    MB = "MB"
    MC = "MC"
    MD = "MD"

    @property
    def three_phase(self) -> bool:
        return self is not MotorType.MD


class DegenerateSlipError(ValueError):
    """Raised when torque is requested at exactly synchronous speed."""


@dataclass(frozen=True)
class MotorParams:
    motor_type: MotorType
    rated_power: float  # kW
    rated_voltage: float = 1.0
    stator_resistance: float = 0.04
    stator_reactance: float = 0.12
    magnetizing_reactance: float = 2.4
    rotor_resistance: float = 0.02
    rotor_reactance: float = 0.12
    inertia_H: float = 0.1
    load_torque_exponent: float = 0.0
    loading: float = 1.0  # mechanical torque at rated speed, pu
    stall_voltage: float = 0.6
    stall_delay: float = 0.032
    R_stall: float = 0.054
    X_stall: float = 0.092
    kp: float = 1.0
    kq: float = 2.0
    power_factor: float = 0.97

    def __post_init__(self):
        object.__setattr__(self, "motor_type", MotorType(self.motor_type))
        problems = []
        if self.rated_power <= 0:
            problems.append("rated_power must be > 0")
        if self.inertia_H <= 0:
            problems.append("inertia_H must be > 0")
        for name in ("stator_resistance", "stator_reactance", "magnetizing_reactance",
                     "rotor_resistance", "rotor_reactance", "R_stall", "X_stall"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be > 0")
        if not 0 < self.power_factor <= 1:
            problems.append("power_factor must be in (0, 1]")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def stall_impedance(self) -> complex:
        return complex(self.R_stall, self.X_stall)


_TYPE_DEFAULTS = {
    MotorType.MA: dict(inertia_H=0.1, load_torque_exponent=0.0),
    MotorType.MB: dict(inertia_H=0.5, load_torque_exponent=2.0),
    MotorType.MC: dict(inertia_H=0.1, load_torque_exponent=2.0),
    MotorType.MD: dict(inertia_H=0.1, load_torque_exponent=0.0),
}


def default_params(motor_type: MotorType | str, rated_power: float, **overrides) -> MotorParams:
    """Default parameter set for a motor category, with optional overrides."""
    motor_type = MotorType(motor_type)
    kwargs = dict(_TYPE_DEFAULTS[motor_type])
    kwargs.update(overrides)
    return MotorParams(motor_type=motor_type, rated_power=rated_power, **kwargs)


@dataclass(frozen=True)
class MotorState:
    slip: float = SLIP_MIN
    connected: bool = True
    stalled: bool = False
    terminal_voltage: complex = 1.0 + 0j
    drawn_current: complex = 0j
    elapsed_under_stall_voltage: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.slip <= 1.0:
            raise ValueError(f"slip {self.slip} outside [0, 1]")


# ---------------------------------------------------------------------------
# three-phase machines

def electrical_torque(params: MotorParams, slip: float, v_mag: float) -> float:
    """Air-gap torque of the approximate equivalent circuit."""
    if slip == 0:
        raise DegenerateSlipError("slip must be clamped away from zero")
    r2s = params.rotor_resistance / slip
    x = params.stator_reactance + params.rotor_reactance
    return v_mag * v_mag * r2s / ((params.stator_resistance + r2s) ** 2 + x * x)


def load_torque(params: MotorParams, speed: float) -> float:
    return params.loading * speed ** params.load_torque_exponent


def three_phase_admittance(params: MotorParams, slip: float) -> complex:
    rotor = complex(params.stator_resistance + params.rotor_resistance / slip,
                    params.stator_reactance + params.rotor_reactance)
    return 1.0 / rotor + 1.0 / complex(0.0, params.magnetizing_reactance)


def three_phase_current(params: MotorParams, slip: float, v_terminal: complex) -> complex:
    return v_terminal * three_phase_admittance(params, slip)


def _peak_torque_slip(params: MotorParams) -> float:
    x = params.stator_reactance + params.rotor_reactance
    return min(1.0, params.rotor_resistance / math.hypot(params.stator_resistance, x))


def steady_state_slip(params: MotorParams, v_mag: float, tol: float = 1e-15) -> float | None:
    """Slip on the stable branch where electrical and load torque balance.

    Bisection between ``SLIP_MIN`` and the peak-torque slip.  Returns None
    when the load cannot be carried at this voltage (the motor would stall).
    """
    def mismatch(s):
        return electrical_torque(params, s, v_mag) - load_torque(params, 1.0 - s)

    lo, hi = SLIP_MIN, _peak_torque_slip(params)
    if mismatch(lo) >= 0:
        return lo
    if mismatch(hi) < 0:
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mismatch(mid) < 0:
            lo = mid
        else:
            hi = mid
    return hi


def _speed_derivative(params: MotorParams, speed: float, v_mag: float, energized: bool) -> float:
    slip = min(1.0, max(SLIP_MIN, 1.0 - speed))
    te = electrical_torque(params, slip, v_mag) if energized else 0.0
    tm = load_torque(params, max(0.0, speed))
    return (te - tm) / (2.0 * params.inertia_H)


def step_three_phase_motor(params: MotorParams, state: MotorState, v_terminal: complex,
                           dt: float) -> MotorState:
    """Advance rotor speed by one Heun step at constant terminal voltage."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_mag = abs(v_terminal)
    speed = 1.0 - state.slip
    k1 = _speed_derivative(params, speed, v_mag, state.connected)
    k2 = _speed_derivative(params, speed + dt * k1, v_mag, state.connected)
    speed += 0.5 * dt * (k1 + k2)
    slip = min(1.0, max(SLIP_MIN, 1.0 - speed))
    if state.connected:
        current = three_phase_current(params, slip, v_terminal)
    else:
        # a de-energized rotor may only slow down
        slip = max(slip, state.slip)
        current = 0j
    return replace(state, slip=slip, terminal_voltage=v_terminal, drawn_current=current)


# ---------------------------------------------------------------------------
# single-phase performance model

def running_power(params: MotorParams, v_mag: float) -> complex:
    p0 = 1.0
    q0 = math.tan(math.acos(params.power_factor))
    return complex(p0 * v_mag ** params.kp, q0 * v_mag ** params.kq)


def running_current(params: MotorParams, v_terminal: complex) -> complex:
    if abs(v_terminal) < 1e-12:
        return 0j
    return (running_power(params, abs(v_terminal)) / v_terminal).conjugate()


def stall_current(params: MotorParams, v_terminal: complex) -> complex:
    return v_terminal / params.stall_impedance


def step_single_phase_motor(params: MotorParams, state: MotorState, v_terminal: complex,
                            dt: float) -> MotorState:
    """Advance the stall timer and stall latch of an MD motor by ``dt``.

    A disconnected motor releases its stall latch; a connected stalled motor
    stays stalled whatever the voltage does.
    """
    if params.motor_type is not MotorType.MD:
        raise ValueError("single-phase stepping requires an MD motor")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not state.connected:
        return replace(state, stalled=False, elapsed_under_stall_voltage=0.0,
                       terminal_voltage=v_terminal, drawn_current=0j)
    stalled = state.stalled
    elapsed = state.elapsed_under_stall_voltage
    if not stalled:
        if abs(v_terminal) < params.stall_voltage:
            elapsed += dt
            if elapsed >= params.stall_delay - STALL_SLACK:
                stalled = True
        else:
            elapsed = 0.0
    current = stall_current(params, v_terminal) if stalled else running_current(params, v_terminal)
    return replace(state, stalled=stalled, elapsed_under_stall_voltage=elapsed,
                   terminal_voltage=v_terminal, drawn_current=current)


def motor_current(params: MotorParams, state: MotorState, v_terminal: complex) -> complex:
    """Current drawn at ``v_terminal`` with the mechanical/stall state frozen."""
    if not state.connected:
        return 0j
    if params.motor_type.three_phase:
        return three_phase_current(params, state.slip, v_terminal)
    if state.stalled:
        return stall_current(params, v_terminal)
    return running_current(params, v_terminal)


def initial_state(params: MotorParams, v_terminal: complex) -> MotorState:
    """Equilibrium state at a steady terminal voltage."""
    if params.motor_type.three_phase:
        slip = steady_state_slip(params, abs(v_terminal))
        if slip is None:
            slip = 1.0
        current = three_phase_current(params, slip, v_terminal)
        return MotorState(slip=slip, terminal_voltage=v_terminal, drawn_current=current)
    return MotorState(slip=0.0, terminal_voltage=v_terminal,
                      drawn_current=running_current(params, v_terminal))


# ---------------------------------------------------------------------------
# vectorized banks used by the engine

def _arr(values, dtype=float):
    return np.asarray(list(values), dtype=dtype)


@dataclass
class ThreePhaseBank:
    """Array form of ``step_three_phase_motor`` for many machines."""

    r1: np.ndarray
    x1: np.ndarray
    xm: np.ndarray
    r2: np.ndarray
    x2: np.ndarray
    H: np.ndarray
    exponent: np.ndarray
    loading: np.ndarray
    slip: np.ndarray
    connected: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.connected is None:
            self.connected = np.ones(len(self.slip), dtype=bool)

    @classmethod
    def from_params(cls, params: list[MotorParams], slips) -> "ThreePhaseBank":
        return cls(
            r1=_arr(p.stator_resistance for p in params),
            x1=_arr(p.stator_reactance for p in params),
            xm=_arr(p.magnetizing_reactance for p in params),
            r2=_arr(p.rotor_resistance for p in params),
            x2=_arr(p.rotor_reactance for p in params),
            H=_arr(p.inertia_H for p in params),
            exponent=_arr(p.load_torque_exponent for p in params),
            loading=_arr(p.loading for p in params),
            slip=np.array(slips, dtype=float),
        )

    def __len__(self):
        return len(self.slip)

    def admittance(self) -> np.ndarray:
        """Terminal admittance at the present slip; zero when disconnected."""
        rotor = (self.r1 + self.r2 / self.slip) + 1j * (self.x1 + self.x2)
        y = 1.0 / rotor + 1.0 / (1j * self.xm)
        return np.where(self.connected, y, 0.0)

    def _derivative(self, speed, v_mag):
        slip = np.clip(1.0 - speed, SLIP_MIN, 1.0)
        r2s = self.r2 / slip
        x = self.x1 + self.x2
        te = v_mag * v_mag * r2s / ((self.r1 + r2s) ** 2 + x * x)
        te = np.where(self.connected, te, 0.0)
        tm = self.loading * np.maximum(speed, 0.0) ** self.exponent
        return (te - tm) / (2.0 * self.H)

    def step(self, v_mag: np.ndarray, dt: float) -> None:
        speed = 1.0 - self.slip
        k1 = self._derivative(speed, v_mag)
        k2 = self._derivative(speed + dt * k1, v_mag)
        slip = np.clip(1.0 - (speed + 0.5 * dt * (k1 + k2)), SLIP_MIN, 1.0)
        self.slip = np.where(self.connected, slip, np.maximum(slip, self.slip))


@dataclass
class SinglePhaseBank:
    """Array form of ``step_single_phase_motor``."""

    p0: np.ndarray
    q0: np.ndarray
    kp: np.ndarray
    kq: np.ndarray
    stall_voltage: np.ndarray
    stall_delay: np.ndarray
    z_stall: np.ndarray
    stalled: np.ndarray = field(default=None)
    elapsed: np.ndarray = field(default=None)
    connected: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.p0)
        if self.stalled is None:
            self.stalled = np.zeros(n, dtype=bool)
        if self.elapsed is None:
            self.elapsed = np.zeros(n)
        if self.connected is None:
            self.connected = np.ones(n, dtype=bool)

    @classmethod
    def from_params(cls, params: list[MotorParams]) -> "SinglePhaseBank":
        return cls(
            p0=np.ones(len(params)),
            q0=_arr(math.tan(math.acos(p.power_factor)) for p in params),
            kp=_arr(p.kp for p in params),
            kq=_arr(p.kq for p in params),
            stall_voltage=_arr(p.stall_voltage for p in params),
            stall_delay=_arr(p.stall_delay for p in params),
            z_stall=_arr((p.stall_impedance for p in params), dtype=complex),
        )

    def __len__(self):
        return len(self.p0)

    def stall_admittance(self) -> np.ndarray:
        return np.where(self.connected & self.stalled, 1.0 / self.z_stall, 0.0)

    def running_current(self, v: np.ndarray) -> np.ndarray:
        """Current of connected, running units at terminal voltages ``v``."""
        vm = np.abs(v)
        s = self.p0 * vm ** self.kp + 1j * self.q0 * vm ** self.kq
        safe = np.where(vm > 1e-12, v, 1.0)
        i = np.conj(s / safe)
        return np.where(self.connected & ~self.stalled & (vm > 1e-12), i, 0.0)

    def current(self, v: np.ndarray) -> np.ndarray:
        return self.running_current(v) + self.stall_admittance() * v

    def step(self, v_mag: np.ndarray, dt: float) -> np.ndarray:
        """Advance stall timers; returns the mask of units that stalled this step."""
        live = self.connected & ~self.stalled
        low = v_mag < self.stall_voltage
        self.elapsed = np.where(live & low, self.elapsed + dt, np.where(live, 0.0, self.elapsed))
        newly = live & low & (self.elapsed >= self.stall_delay - STALL_SLACK)
        self.stalled = self.stalled | newly
        off = ~self.connected
        self.stalled = np.where(off, False, self.stalled)
        self.elapsed = np.where(off, 0.0, self.elapsed)
        return newly
