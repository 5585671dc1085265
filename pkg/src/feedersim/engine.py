"""
Fixed-step simulation of a feeder with protected motor loads.

Each step at time t runs, in order:

1. the source EMF in effect at t (sag schedule);
2. the network solution with device states frozen from the previous step;
3. protection stepping on the voltages and currents just solved;
4. connection statuses (OR of trips) and capacitor bank switching;
5. motor integration over dt;
6. recording.

The trace row for t therefore holds the solved voltages/currents at t and
the connection statuses decided at t.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .motors import SinglePhaseBank, ThreePhaseBank, initial_state
from .network import (NetworkSolution, SolverError, SourceModel, build_admittance, capbank_admittance,
                      power_balance, solve_network, zip_current)
from .protection import (CapBankState, CapStatus, OverloadBank, ThermalBank, VoltageProtectionBank,
                         step_capbank)
from .scenario import Scenario, motor_params_for, sample_protection_params
from .trace import Event, SimulationTrace

logger = logging.getLogger(__name__)

# event cause for a single-phase stall: the motor drops to its locked-rotor
# branch on its own, like a contactor-style state change rather than a relay
STALL_CAUSE = "contactor-equivalent"


class SimulationAborted(RuntimeError):
    """Run stopped early; ``trace`` holds everything recorded before the abort."""

    def __init__(self, message: str, trace: SimulationTrace | None = None, device: str | None = None,
                 cause: Exception | None = None):
        super().__init__(message)
        self.trace = trace
        self.device = device
        self.cause = cause


@dataclass
class _Group:
    """Devices of one kind: their indices into the device list and nodes."""

    dev: np.ndarray
    node: np.ndarray
    k: np.ndarray  # device base -> system base current ratio

    def incidence(self, n_nodes: int) -> np.ndarray:
        m = np.zeros((n_nodes, len(self.dev)))
        m[self.node, np.arange(len(self.dev))] = 1.0
        return m


class Simulation:
    """Mutable run state for one scenario."""

    def __init__(self, scenario: Scenario, *, init_tol: float = 1e-10):
        scenario.validate()
        self.scenario = scenario
        self.dt = scenario.dt
        self.feeder = scenario.feeder
        self.source: SourceModel = scenario.source
        self.node_names = list(self.feeder.nodes)
        self.n_nodes = len(self.node_names)
        self.src_idx = self.feeder.index[self.feeder.source_node]
        if self.src_idx != 0:
            # keep the head node first so traces index it at column 0
            order = [self.src_idx] + [k for k in range(self.n_nodes) if k != self.src_idx]
            self.node_names = [self.node_names[k] for k in order]
            self.feeder = replace(self.feeder, nodes=self.node_names)
            self.src_idx = 0
        node_index = {n: k for k, n in enumerate(self.node_names)}

        self.devices = scenario.devices()
        self.device_ids = [d.id for d in self.devices]
        self.protections = sample_protection_params(
            self.devices, scenario.param_ranges, scenario.rng_seed,
            enabled=scenario.protection_overrides, max_trip_count=scenario.max_trip_count,
            work_time=scenario.settle_time, heating=scenario.thermal_heating)
        base = self.feeder.base_mva
        self.params = {}

        tp, md, st = [], [], []
        for j, d in enumerate(self.devices):
            if d.category == "Static":
                st.append(j)
            else:
                self.params[d.id] = motor_params_for(d, self.protections[d.id],
                                                     scenario.motor_overrides)
                (md if d.category == "MD" else tp).append(j)

        def group(idx):
            idx = np.array(idx, dtype=int)
            nodes = np.array([node_index[self.devices[j].node] for j in idx], dtype=int)
            k = np.array([self.devices[j].rating_kw / 1000.0 / base for j in idx], dtype=float)
            return _Group(idx, nodes, k)

        self.tp, self.md, self.st = group(tp), group(md), group(st)
        self.M_tp = self.tp.incidence(self.n_nodes)
        self.M_md = self.md.incidence(self.n_nodes)
        self.M_st = self.st.incidence(self.n_nodes)
        pf = scenario.static_power_factor
        self.zip_s0 = self.st.k * complex(1.0, math.tan(math.acos(pf)))
        self.zip_frac = scenario.zip_fractions

        self.tp_bank = ThreePhaseBank.from_params([self.params[self.device_ids[j]] for j in tp],
                                                  np.ones(len(tp)))
        self.md_bank = SinglePhaseBank.from_params([self.params[self.device_ids[j]] for j in md])

        # protection banks; *_dev map each instance to its device index
        vparams, vdev, vtype = [], [], []
        oparams, odev, tparams, tdev = [], [], [], []
        for j, d in enumerate(self.devices):
            prot = self.protections[d.id]
            for ptype, p in sorted(prot.voltage.items()):
                vparams.append(p)
                vdev.append(j)
                vtype.append(ptype)
            if prot.overload is not None:
                oparams.append(prot.overload)
                odev.append(j)
            if prot.thermal is not None:
                tparams.append(prot.thermal)
                tdev.append(j)
        self.vbank, self.vdev, self.vtype = VoltageProtectionBank(vparams), np.array(vdev, int), vtype
        self.obank, self.odev = OverloadBank(oparams), np.array(odev, int)
        self.tbank, self.tdev = ThermalBank(tparams), np.array(tdev, int)

        self.cap_ids = [c.id for c in self.feeder.cap_banks]
        self.cap_node = np.array([node_index[c.node] for c in self.feeder.cap_banks], dtype=int)
        self.cap_y = np.array([capbank_admittance(c, base) for c in self.feeder.cap_banks],
                              dtype=complex)
        self.cap_state = [CapBankState() for _ in self.cap_ids]
        self._Y_cache: dict[tuple, np.ndarray] = {}
        self.Y_branches = build_admittance(self.feeder, {c: False for c in self.cap_ids})

        n_dev = len(self.devices)
        self.connected = np.ones(n_dev, dtype=bool)
        self.stalled = np.zeros(n_dev, dtype=bool)
        self.temperature = np.zeros(n_dev)
        self.current = np.zeros(n_dev)
        self.voltages = np.full(self.n_nodes, self.source.E_th, dtype=complex)
        self.events: list[Event] = []
        self.step_index = 0
        self.last_solution: NetworkSolution | None = None
        self.last_balance: dict | None = None
        self._initialize(init_tol)

    # -- network coupling ---------------------------------------------------

    def _cap_on(self) -> tuple[bool, ...]:
        return tuple(s.status is CapStatus.ON for s in self.cap_state)

    def admittance(self) -> np.ndarray:
        key = self._cap_on()
        Y = self._Y_cache.get(key)
        if Y is None:
            Y = build_admittance(self.feeder, dict(zip(self.cap_ids, key)))
            self._Y_cache[key] = Y
        return Y

    def _cap_shunt(self) -> np.ndarray:
        out = np.zeros(self.n_nodes, dtype=complex)
        on = np.array(self._cap_on(), dtype=bool)
        if on.any():
            np.add.at(out, self.cap_node[on], self.cap_y[on])
        return out

    def _linear_shunt(self) -> np.ndarray:
        return self.M_tp @ (self.tp.k * self.tp_bank.admittance()) + \
            self.M_md @ (self.md.k * self.md_bank.stall_admittance())

    def _nonlinear_current(self, v: np.ndarray) -> np.ndarray:
        i_md = self.md_bank.running_current(v[self.md.node]) * self.md.k
        a_z, a_i, a_p = self.zip_frac
        i_st = zip_current(self.zip_s0, a_z, a_i, a_p, v[self.st.node])
        return self.M_md @ i_md + self.M_st @ i_st

    def solve(self, t: float) -> NetworkSolution:
        return solve_network(self.admittance(), self.source, self._nonlinear_current, t,
                             shunt=self._linear_shunt(), source_index=self.src_idx,
                             v0=self.voltages, tol=self.scenario.tolerance,
                             max_iter=self.scenario.max_iterations)

    def device_currents(self, v: np.ndarray) -> np.ndarray:
        """Current magnitude of every device on its own base at node voltages ``v``."""
        out = np.zeros(len(self.devices))
        vt = v[self.tp.node]
        out[self.tp.dev] = np.abs(self.tp_bank.admittance() * vt)
        out[self.md.dev] = np.abs(self.md_bank.current(v[self.md.node]))
        a_z, a_i, a_p = self.zip_frac
        out[self.st.dev] = np.abs(zip_current(self.zip_s0, a_z, a_i, a_p, v[self.st.node])) / \
            np.where(self.st.k > 0, self.st.k, 1.0)
        return out

    def _initialize(self, tol: float) -> None:
        """Pre-fault equilibrium: alternate network solves and motor slip updates."""
        t0 = 0.0
        for _ in range(100):
            sol = self.solve(t0)
            self.voltages = sol.voltages
            vt = np.abs(sol.voltages[self.tp.node])
            slips = np.array([initial_state(self.params[self.device_ids[j]], complex(v)).slip
                              for j, v in zip(self.tp.dev, vt)])
            change = float(np.max(np.abs(slips - self.tp_bank.slip))) if len(slips) else 0.0
            self.tp_bank.slip = slips
            if change < tol:
                break
        else:
            logger.warning("pre-fault initialization did not settle below %.1e", tol)
        stalled = self.tp_bank.slip >= 1.0
        if stalled.any():
            names = [self.device_ids[j] for j in self.tp.dev[stalled]]
            logger.warning("motors cannot carry their load at the pre-fault voltage: %s", names)

    # -- stepping -------------------------------------------------------------

    @property
    def time(self) -> float:
        # rounded onto the step grid so 1400 * 0.001 reads as 1.4
        return round(self.step_index * self.dt, 12)

    def step(self) -> dict:
        """Advance one step; returns the row to record."""
        t = self.time
        dt = self.dt
        sol = self.solve(t)
        v = sol.voltages
        if not np.all(np.isfinite(v)):
            raise SimulationAborted(f"non-finite node voltage at t={t:.6f}")
        self.voltages = v
        self.last_solution = sol
        self.last_balance = power_balance(self.Y_branches, self._cap_shunt(), sol, self.source,
                                          self.src_idx)
        vmag = np.abs(v)
        current = self.device_currents(v)
        bad = ~np.isfinite(current)
        if bad.any():
            dev = self.device_ids[int(np.nonzero(bad)[0][0])]
            raise SimulationAborted(f"non-finite current at t={t:.6f} in {dev}", device=dev)
        self.current = current

        # protections
        prev_v = self.vbank.prot_trip.copy()
        prev_o = self.obank.prot_trip.copy()
        prev_t = self.tbank.prot_trip.copy()
        if len(self.vbank):
            self.vbank.step(vmag[self._dev_node(self.vdev)], t, dt)
        if len(self.obank):
            self.obank.step(current[self.odev], t, dt)
        if len(self.tbank):
            self.tbank.step(current[self.tdev], self.stalled[self.tdev], dt)
            self.temperature[self.tdev] = self.tbank.temperature
            if not np.all(np.isfinite(self.tbank.temperature)):
                k = int(np.nonzero(~np.isfinite(self.tbank.temperature))[0][0])
                dev = self.device_ids[self.tdev[k]]
                raise SimulationAborted(f"non-finite temperature at t={t:.6f} in {dev}", device=dev)
        self._log_edges(t, prev_v, self.vbank.prot_trip, self.vdev, self.vtype)
        self._log_edges(t, prev_o, self.obank.prot_trip, self.odev, ["P2"] * len(self.odev))
        self._log_edges(t, prev_t, self.tbank.prot_trip, self.tdev, ["P3"] * len(self.tdev))

        tripped = np.zeros(len(self.devices), dtype=bool)
        np.logical_or.at(tripped, self.vdev, self.vbank.prot_trip)
        np.logical_or.at(tripped, self.odev, self.obank.prot_trip)
        np.logical_or.at(tripped, self.tdev, self.tbank.prot_trip)
        self.connected = ~tripped

        for k, cap in enumerate(self.feeder.cap_banks):
            new = step_capbank(cap.params, self.cap_state[k], float(vmag[self.cap_node[k]]))
            if new.status is not self.cap_state[k].status:
                kind = "capbank_off" if new.status is CapStatus.OFF else "capbank_on"
                self.events.append(Event(t, cap.id, kind, "capbank"))
            self.cap_state[k] = new

        # motors
        self.tp_bank.connected = self.connected[self.tp.dev]
        self.md_bank.connected = self.connected[self.md.dev]
        self.tp_bank.step(vmag[self.tp.node], dt)
        newly = self.md_bank.step(vmag[self.md.node], dt)
        for k in np.nonzero(newly)[0]:
            self.events.append(Event(t, self.device_ids[self.md.dev[k]], "stall", STALL_CAUSE))
        self.stalled[self.md.dev] = self.md_bank.stalled
        if not np.all(np.isfinite(self.tp_bank.slip)):
            k = int(np.nonzero(~np.isfinite(self.tp_bank.slip))[0][0])
            dev = self.device_ids[self.tp.dev[k]]
            raise SimulationAborted(f"non-finite slip at t={t:.6f} in {dev}", device=dev)

        self.step_index += 1
        return dict(time=t, voltages=vmag, current=current, connected=self.connected.copy(),
                    stalled=self.stalled.copy(), temperature=self.temperature.copy(),
                    mismatch=abs(self.last_balance["mismatch"]))

    def _dev_node(self, dev_idx: np.ndarray) -> np.ndarray:
        if not hasattr(self, "_node_of_device"):
            index = {n: k for k, n in enumerate(self.node_names)}
            self._node_of_device = np.array([index[d.node] for d in self.devices], dtype=int)
        return self._node_of_device[dev_idx]

    def _log_edges(self, t, before, after, dev_idx, causes) -> None:
        for k in np.nonzero(before != after)[0]:
            kind = "trip" if after[k] else "reconnect"
            self.events.append(Event(t, self.device_ids[dev_idx[k]], kind, causes[k]))

    def metadata(self) -> dict:
        sc = self.scenario
        return {
            "scenario": sc.name,
            "scenario_sha256": sc.source_hash,
            "rng_seed": sc.rng_seed,
            "dt": sc.dt,
            "duration": sc.duration,
            "settle_time": sc.settle_time,
            "sags": [[s.t_start, s.t_end, s.v_depressed] for s in sc.source.sag_schedule],
            "source_mode": sc.source.mode.value,
            "enabled_protections": sorted(p for p, on in sc.protection_overrides.items() if on),
            "warnings": list(sc.warnings),
            "device_nodes": {d.id: d.node for d in self.devices},
            "versions": {"feedersim": __version__, "numpy": np.__version__},
        }


def step(state: Simulation, dt: float) -> Simulation:
    """Advance ``state`` by one step of the scenario's fixed ``dt`` (in place)."""
    if not math.isclose(dt, state.dt, rel_tol=0, abs_tol=1e-15):
        raise ValueError(f"dt={dt} differs from the scenario step {state.dt}")
    state.step()
    return state


class _Recorder:
    def __init__(self, sim: Simulation, n: int):
        self.sim = sim
        self.n = 0
        nd = len(sim.devices)
        self.time = np.zeros(n)
        self.voltages = np.zeros((n, sim.n_nodes))
        self.current = np.zeros((n, nd))
        self.connected = np.zeros((n, nd), dtype=bool)
        self.stalled = np.zeros((n, nd), dtype=bool)
        self.temperature = np.zeros((n, nd))
        self.mismatch = np.zeros(n)

    def add(self, row: dict) -> None:
        k = self.n
        self.time[k] = row["time"]
        self.voltages[k] = row["voltages"]
        self.current[k] = row["current"]
        self.connected[k] = row["connected"]
        self.stalled[k] = row["stalled"]
        self.temperature[k] = row["temperature"]
        self.mismatch[k] = row["mismatch"]
        self.n += 1

    def trace(self) -> SimulationTrace:
        n, sim = self.n, self.sim
        return SimulationTrace(self.time[:n].copy(), list(sim.node_names), self.voltages[:n].copy(),
                               list(sim.device_ids), self.current[:n].copy(),
                               self.connected[:n].copy(), self.stalled[:n].copy(),
                               self.temperature[:n].copy(), list(sim.events),
                               self.mismatch[:n].copy(), sim.metadata())


def n_steps(scenario: Scenario) -> int:
    return int(round(scenario.duration / scenario.dt))


def run(scenario: Scenario) -> SimulationTrace:
    """Simulate ``scenario`` over its full duration.

    Raises ``SimulationAborted`` (with the partial trace attached) on solver
    non-convergence or non-finite states.
    """
    try:
        sim = Simulation(scenario)
    except SolverError as exc:
        raise SimulationAborted(f"pre-fault network solution failed: {exc}", cause=exc) from exc
    steps = n_steps(scenario)
    rec = _Recorder(sim, steps)
    try:
        for _ in range(steps):
            rec.add(sim.step())
    except SolverError as exc:
        raise SimulationAborted(f"network solver failed: {exc}", rec.trace(), cause=exc) from exc
    except SimulationAborted as exc:
        exc.trace = rec.trace()
        raise
    return rec.trace()
