"""Simulation traces: recording, CSV export/import and scenario comparison."""

from __future__ import annotations

import csv
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EVENT_KINDS = ("trip", "reconnect", "stall", "capbank_off", "capbank_on")
EVENT_CAUSES = ("P1", "P2", "P3", "P4", "P5", "contactor-equivalent", "capbank")
TRACE_FILES = ("voltages.csv", "devices.csv", "events.csv")


@dataclass(frozen=True)
class Event:
    time: float
    device: str
    kind: str
    cause: str


@dataclass
class SimulationTrace:
    time: np.ndarray
    node_names: list[str]
    voltages: np.ndarray  # (steps, nodes) magnitude pu
    device_ids: list[str]
    current: np.ndarray  # (steps, devices) magnitude pu on the device base
    connected: np.ndarray
    stalled: np.ndarray
    temperature: np.ndarray
    events: list[Event] = field(default_factory=list)
    mismatch: np.ndarray | None = None  # |S_source - S_loads - S_losses| per step
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.time)

    def truncated(self, n: int) -> "SimulationTrace":
        mism = None if self.mismatch is None else self.mismatch[:n]
        end = self.time[n - 1] if n else -np.inf
        return SimulationTrace(self.time[:n], self.node_names, self.voltages[:n], self.device_ids,
                               self.current[:n], self.connected[:n], self.stalled[:n],
                               self.temperature[:n], [e for e in self.events if e.time <= end],
                               mism, dict(self.metadata))

    def node_voltage(self, node: str) -> np.ndarray:
        return self.voltages[:, self.node_names.index(node)]

    @property
    def head_voltage(self) -> np.ndarray:
        return self.voltages[:, 0]

    def device_events(self, device: str) -> list[Event]:
        return [e for e in self.events if e.device == device]

    def trip_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(e.cause for e in self.events if e.kind == "trip").items()))


# ---------------------------------------------------------------------------
# CSV export

def _fmt(x: float) -> str:
    return repr(float(x))


def _write_atomic(path: Path, rows, partial: bool) -> Path:
    target = path.with_name(path.name + ".partial") if partial else path
    tmp = target.with_name(target.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)
    os.replace(tmp, target)
    return target


def write_trace(trace: SimulationTrace, out_dir, *, partial: bool = False) -> list[Path]:
    """Write voltages.csv, devices.csv and events.csv (``.partial`` suffix when aborted)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def voltage_rows():
        yield ["time"] + list(trace.node_names)
        for k, t in enumerate(trace.time):
            yield [_fmt(t)] + [_fmt(v) for v in trace.voltages[k]]

    def device_rows():
        yield ["time", "device", "current", "connected", "stalled", "temperature"]
        for k, t in enumerate(trace.time):
            ts = _fmt(t)
            cur, con, st, tmp = (trace.current[k], trace.connected[k], trace.stalled[k],
                                 trace.temperature[k])
            for j, dev in enumerate(trace.device_ids):
                yield [ts, dev, _fmt(cur[j]), int(con[j]), int(st[j]), _fmt(tmp[j])]

    def event_rows():
        yield ["time", "device", "kind", "cause"]
        for e in trace.events:
            yield [_fmt(e.time), e.device, e.kind, e.cause]

    written.append(_write_atomic(out_dir / "voltages.csv", voltage_rows(), partial))
    written.append(_write_atomic(out_dir / "devices.csv", device_rows(), partial))
    written.append(_write_atomic(out_dir / "events.csv", event_rows(), partial))
    return written


def read_trace(directory) -> SimulationTrace:
    """Load a trace previously written by ``write_trace``."""
    directory = Path(directory)
    with open(directory / "voltages.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    nodes = rows[0][1:]
    data = np.array(rows[1:], dtype=float).reshape(-1, len(nodes) + 1)
    time = data[:, 0]
    voltages = data[:, 1:]

    with open(directory / "devices.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        drows = list(reader)
    device_ids = list(dict.fromkeys(r[1] for r in drows))
    n, m = len(time), len(device_ids)
    cols = np.array([r[2:] for r in drows], dtype=float).reshape(n, m, 4) if m else \
        np.zeros((n, 0, 4))

    events = []
    with open(directory / "events.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for t, dev, kind, cause in reader:
            events.append(Event(float(t), dev, kind, cause))

    metadata = {}
    meta_path = directory / "metadata.json"
    if meta_path.exists():
        metadata = json.loads(meta_path.read_text())
    return SimulationTrace(time, nodes, voltages, device_ids, cols[:, :, 0],
                           cols[:, :, 1].astype(bool), cols[:, :, 2].astype(bool), cols[:, :, 3],
                           events, None, metadata)


# ---------------------------------------------------------------------------
# comparison

class TraceMismatchError(ValueError):
    pass


def recovery_time(trace: SimulationTrace, after: float, band: float = 0.95) -> float | None:
    """Seconds after ``after`` until the head voltage re-enters the band for good."""
    v = trace.head_voltage
    mask = trace.time >= after
    if not mask.any():
        return None
    idx = np.nonzero(mask)[0]
    outside = idx[v[idx] < band]
    if len(outside) == 0:
        return 0.0
    last = outside[-1]
    if last + 1 >= len(v):
        return None
    return float(trace.time[last + 1] - after)


@dataclass
class ComparisonReport:
    time: np.ndarray
    node_names: list[str]
    difference: np.ndarray  # (steps, nodes) of |V|_a - |V|_b
    trip_counts_a: dict[str, int]
    trip_counts_b: dict[str, int]
    recovery_a: float | None
    recovery_b: float | None
    fault_clear: float | None
    window: float
    window_min_difference: float | None
    window_fraction_higher: float | None

    @property
    def a_not_below_b(self) -> bool | None:
        """Head voltage of A at or above B at every step of the recovery window."""
        if self.window_min_difference is None:
            return None
        return self.window_min_difference >= 0.0

    def trip_table(self) -> list[tuple[str, int, int]]:
        causes = sorted(set(self.trip_counts_a) | set(self.trip_counts_b))
        return [(c, self.trip_counts_a.get(c, 0), self.trip_counts_b.get(c, 0)) for c in causes]


def _fault_clear_time(trace: SimulationTrace) -> float | None:
    sags = trace.metadata.get("sags") or []
    return max(s[1] for s in sags) if sags else None


def compare_runs(trace_a: SimulationTrace, trace_b: SimulationTrace, *, window: float = 2.0,
                 band: float = 0.95) -> ComparisonReport:
    """Voltage differences (A minus B), trip counts and recovery metrics.

    The recovery window opens when the last scheduled sag ends and lasts
    ``window`` seconds.
    """
    if len(trace_a.time) != len(trace_b.time) or not np.allclose(trace_a.time, trace_b.time,
                                                                 rtol=0, atol=1e-12):
        raise TraceMismatchError("traces do not share a time grid")
    if trace_a.node_names != trace_b.node_names:
        raise TraceMismatchError("traces do not share a node set")
    diff = trace_a.voltages - trace_b.voltages
    clear = _fault_clear_time(trace_a)
    if clear is None:
        clear = _fault_clear_time(trace_b)
    wmin = wfrac = None
    rec_a = rec_b = None
    if clear is not None:
        in_window = (trace_a.time >= clear - 1e-12) & (trace_a.time < clear + window - 1e-12)
        if in_window.any():
            head = diff[in_window, 0]
            wmin = float(head.min())
            wfrac = float(np.mean(head > 0.0))
        rec_a = recovery_time(trace_a, clear, band)
        rec_b = recovery_time(trace_b, clear, band)
    return ComparisonReport(trace_a.time, list(trace_a.node_names), diff,
                            trace_a.trip_counts(), trace_b.trip_counts(), rec_a, rec_b, clear,
                            window, wmin, wfrac)


def write_comparison(report: ComparisonReport, path) -> Path:
    path = Path(path)
    rows = [["time"] + [f"dv_{n}" for n in report.node_names]]
    for k, t in enumerate(report.time):
        rows.append([_fmt(t)] + [_fmt(x) for x in report.difference[k]])
    return _write_atomic(path, rows, partial=False)
