"""
Radial feeder model and quasi-static phasor network solution.

Nodes carry device loads; branches (lines and off-nominal-tap transformers)
form a tree rooted at the source node.  The source is either stiff or a
Thevenin equivalent, and its EMF can be depressed over scheduled intervals.

Loads are handled in two parts during a solve: a per-node shunt admittance
for anything linear in voltage (three-phase motors at frozen slip, stalled
single-phase motors) which is folded into the matrix, and a nonlinear
current injection function iterated to a fixed point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
import scipy.linalg

from .protection import CapBankParams

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Structural or semantic problem in a network or source description."""


class SolverError(RuntimeError):
    def __init__(self, message: str, voltages: np.ndarray, mismatch: float):
        super().__init__(f"{message} (mismatch {mismatch:.3e})")
        self.voltages = voltages
        self.mismatch = mismatch


@dataclass(frozen=True)
class Branch:
    from_node: str
    to_node: str
    impedance: complex
    tap: float = 1.0  # off-nominal ratio on the from side; 1.0 for lines

    def admittances(self) -> tuple[complex, complex, complex]:
        """(y_ff, y_ft, y_tt); the branch matrix is symmetric."""
        y = 1.0 / self.impedance
        return y / (self.tap * self.tap), -y / self.tap, y


@dataclass(frozen=True)
class CapBank:
    id: str
    node: str
    q_kvar: float
    params: CapBankParams = field(default_factory=CapBankParams)


@dataclass
class FeederModel:
    nodes: list[str]
    branches: list[Branch]
    transformers: list[Branch] = field(default_factory=list)
    cap_banks: list[CapBank] = field(default_factory=list)
    attachments: dict[str, str] = field(default_factory=dict)
    base_mva: float = 10.0
    base_kv: dict[str, float] = field(default_factory=dict)
    source_node: str | None = None

    def __post_init__(self):
        if self.source_node is None and self.nodes:
            self.source_node = self.nodes[0]

    @property
    def index(self) -> dict[str, int]:
        return {n: k for k, n in enumerate(self.nodes)}

    def all_branches(self) -> list[Branch]:
        return list(self.branches) + list(self.transformers)

    def problems(self) -> list[str]:
        """Every violated structural invariant, empty when valid."""
        out = []
        if len(set(self.nodes)) != len(self.nodes):
            out.append("duplicate node ids")
        if self.base_mva <= 0:
            out.append("base_mva must be positive")
        idx = self.index
        if self.source_node not in idx:
            out.append(f"source node {self.source_node!r} not in nodes")
        adjacency: dict[str, list[str]] = {n: [] for n in self.nodes}
        for b in self.all_branches():
            for end in (b.from_node, b.to_node):
                if end not in idx:
                    out.append(f"branch {b.from_node}-{b.to_node} references unknown node {end!r}")
            if b.impedance.real < 0:
                out.append(f"branch {b.from_node}-{b.to_node} has negative resistance")
            if b.impedance == 0:
                out.append(f"branch {b.from_node}-{b.to_node} has zero impedance")
            if b.tap <= 0:
                out.append(f"branch {b.from_node}-{b.to_node} has non-positive tap")
            if b.from_node in adjacency and b.to_node in adjacency:
                adjacency[b.from_node].append(b.to_node)
                adjacency[b.to_node].append(b.from_node)
        for c in self.cap_banks:
            if c.node not in idx:
                out.append(f"capacitor bank {c.id} at unknown node {c.node!r}")
        for dev, node in self.attachments.items():
            if node not in idx:
                out.append(f"device {dev} attached to unknown node {node!r}")
        if out or not self.nodes:
            return out or ["feeder has no nodes"]
        seen = {self.source_node}
        stack = [self.source_node]
        while stack:
            for nb in adjacency[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        missing = [n for n in self.nodes if n not in seen]
        if missing:
            out.append(f"nodes not connected to the source: {', '.join(missing)}")
        if len(self.all_branches()) != len(self.nodes) - 1:
            out.append("feeder is not radial (branch count must equal node count - 1)")
        return out

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))


def build_admittance(feeder: FeederModel, capbank_statuses: dict[str, bool] | None = None
                     ) -> np.ndarray:
    """Nodal admittance matrix, including capacitor banks that are switched on."""
    feeder.validate()
    idx = feeder.index
    n = len(feeder.nodes)
    Y = np.zeros((n, n), dtype=complex)
    for b in feeder.all_branches():
        f, t = idx[b.from_node], idx[b.to_node]
        yff, yft, ytt = b.admittances()
        Y[f, f] += yff
        Y[t, t] += ytt
        Y[f, t] += yft
        Y[t, f] += yft
    statuses = capbank_statuses or {}
    for c in feeder.cap_banks:
        if statuses.get(c.id, True):
            Y[idx[c.node], idx[c.node]] += capbank_admittance(c, feeder.base_mva)
    return Y


def capbank_admittance(cap: CapBank, base_mva: float) -> complex:
    return 1j * cap.q_kvar / 1000.0 / base_mva


class SourceMode(str, Enum):
    STIFF = "stiff"
    THEVENIN = "thevenin"


@dataclass(frozen=True)
class Sag:
    t_start: float
    t_end: float
    v_depressed: float


@dataclass
class SourceModel:
    mode: SourceMode = SourceMode.THEVENIN
    E_th: complex = 1.0 + 0j
    Z_th: complex = 0.004 + 0.04j
    sag_schedule: list[Sag] = field(default_factory=list)

    def __post_init__(self):
        self.mode = SourceMode(self.mode)
        self.sag_schedule = sorted(self.sag_schedule, key=lambda s: s.t_start)

    def problems(self) -> list[str]:
        out = []
        if self.mode is SourceMode.THEVENIN and self.Z_th == 0:
            out.append("Z_th = 0 is only allowed for a stiff source")
        if self.Z_th.real < 0:
            out.append("Z_th must have non-negative resistance")
        for s in self.sag_schedule:
            if s.t_end <= s.t_start:
                out.append(f"sag ({s.t_start}, {s.t_end}) ends before it starts")
            if s.v_depressed < 0:
                out.append(f"sag ({s.t_start}, {s.t_end}) has negative voltage")
        for a, b in zip(self.sag_schedule, self.sag_schedule[1:]):
            if b.t_start < a.t_end:
                out.append(f"sag intervals overlap: ({a.t_start}, {a.t_end}) and "
                           f"({b.t_start}, {b.t_end})")
        return out

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))


def apply_sag(source: SourceModel, t_now: float) -> complex:
    """EMF in effect at ``t_now``; sag intervals are half-open [start, end)."""
    for s in source.sag_schedule:
        if s.t_start <= t_now < s.t_end:
            phase = source.E_th / abs(source.E_th) if source.E_th != 0 else 1.0
            return s.v_depressed * phase
    return source.E_th


@dataclass(frozen=True)
class ZipLoad:
    S0: complex  # at nominal voltage, in the caller's power unit
    a_Z: float = 0.4
    a_I: float = 0.3
    a_P: float = 0.3

    def __post_init__(self):
        fractions = (self.a_Z, self.a_I, self.a_P)
        if min(fractions) < 0:
            raise ValueError("ZIP fractions must be non-negative")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError(f"ZIP fractions sum to {sum(fractions)}, expected 1")


def zip_power(load: ZipLoad, v_mag: float) -> complex:
    return load.S0 * (load.a_Z * v_mag * v_mag + load.a_I * v_mag + load.a_P)


def zip_current(S0, a_Z, a_I, a_P, v):
    """Vectorized ZIP current draw at complex voltages ``v``."""
    vm = np.abs(v)
    s = S0 * (a_Z * vm * vm + a_I * vm + a_P)
    safe = np.where(vm > 1e-12, v, 1.0)
    return np.where(vm > 1e-12, np.conj(s / safe), 0.0)


@dataclass
class NetworkSolution:
    voltages: np.ndarray  # feeder nodes, complex pu
    source_voltage: complex  # EMF behind Z_th (equals head voltage when stiff)
    source_current: complex  # leaving the source toward the feeder
    load_current: np.ndarray  # total drawn per node, shunts included
    iterations: int
    max_change: float


def solve_network(Y: np.ndarray, source: SourceModel, device_currents: Callable[[np.ndarray], np.ndarray],
                  t_now: float, *, shunt: np.ndarray | None = None, source_index: int = 0,
                  v0: np.ndarray | None = None, tol: float = 1e-6, max_iter: int = 50
                  ) -> NetworkSolution:
    """Fixed-point network solution at one instant.

    ``device_currents(v)`` returns the current drawn at every node for
    feeder voltages ``v``; ``shunt`` adds a per-node constant admittance.
    Raises ``SolverError`` when the voltage update does not settle below
    ``tol`` within ``max_iter`` iterations.
    """
    n = Y.shape[0]
    e = apply_sag(source, t_now)
    Yl = Y.astype(complex, copy=True)
    if shunt is not None:
        Yl[np.diag_indices(n)] += shunt
    others = np.array([k for k in range(n) if k != source_index], dtype=int)

    if source.mode is SourceMode.STIFF:
        A = Yl[np.ix_(others, others)]
        b_fixed = -Yl[others, source_index] * e
        unknown = others
    else:
        # head node becomes unknown; the Thevenin branch ties it to the EMF
        y_th = 1.0 / source.Z_th
        A = Yl.copy()
        A[source_index, source_index] += y_th
        b_fixed = np.zeros(n, dtype=complex)
        b_fixed[source_index] = y_th * e
        unknown = np.arange(n)

    lu = scipy.linalg.lu_factor(A, check_finite=False)
    v = np.full(n, e, dtype=complex) if v0 is None else np.array(v0, dtype=complex)
    v[source_index] = v[source_index] if source.mode is SourceMode.THEVENIN else e
    change = np.inf
    for it in range(1, max_iter + 1):
        injected = device_currents(v)
        v_new = v.copy()
        v_new[unknown] = scipy.linalg.lu_solve(lu, b_fixed - injected[unknown], check_finite=False)
        change = float(np.max(np.abs(v_new - v))) if n else 0.0
        v = v_new
        if not np.all(np.isfinite(v)):
            raise SolverError("network solution diverged to non-finite voltages", v, np.inf)
        if change < tol:
            break
    else:
        raise SolverError(f"no convergence after {max_iter} iterations at t={t_now:.6f}", v, change)

    load = device_currents(v)
    if shunt is not None:
        load = load + shunt * v
    if source.mode is SourceMode.STIFF:
        i_src = complex((Y[source_index] @ v) + load[source_index])
    else:
        i_src = complex((e - v[source_index]) / source.Z_th)
    return NetworkSolution(v, e, i_src, load, it, change)


def power_balance(Y_branches: np.ndarray, cap_shunt: np.ndarray, solution: NetworkSolution,
                  source: SourceModel, source_index: int = 0) -> dict[str, complex]:
    """Source injection, consumption and series losses of a solved network.

    ``Y_branches`` holds the series elements only; capacitor and device
    shunts are counted as consumption.  The ``mismatch`` entry is the
    complex power left unaccounted for.
    """
    v = solution.voltages
    loads = complex(np.sum(v * np.conj(solution.load_current + cap_shunt * v)))
    losses = complex(np.sum(v * np.conj(Y_branches @ v)))
    s_source = solution.source_voltage * np.conj(solution.source_current)
    if source.mode is SourceMode.THEVENIN:
        i = solution.source_current
        losses += source.Z_th * i * np.conj(i)
    return {"source": complex(s_source), "loads": loads, "losses": losses,
            "mismatch": complex(s_source - loads - losses)}
