"""Static SVG figures of simulation traces."""

from __future__ import annotations

import datetime as _dt
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .trace import SimulationTrace  # noqa: E402


def _save(fig, path: Path, deterministic: bool) -> Path:
    metadata = {"Date": None} if deterministic else {
        "Date": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    with matplotlib.rc_context({"svg.hashsalt": "feedersim"}):
        fig.savefig(path, format="svg", metadata=metadata)
    plt.close(fig)
    return path


def plot_head_voltage(trace: SimulationTrace, path, *, deterministic=False, label=None) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(trace.time, trace.head_voltage, lw=1.2, label=label or trace.node_names[0])
    ax.set_xlabel("time (s)")
    ax.set_ylabel("voltage (pu)")
    ax.set_title(f"Feeder head voltage ({trace.metadata.get('scenario', '')})")
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    return _save(fig, Path(path), deterministic)


def plot_device(trace: SimulationTrace, device: str, path, *, deterministic=False) -> Path:
    """Terminal voltage, current, connection status and temperature of one device."""
    j = trace.device_ids.index(device)
    node = trace.metadata.get("device_nodes", {}).get(device)
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(7, 7))
    if node in trace.node_names:
        axes[0].plot(trace.time, trace.node_voltage(node), lw=1.0)
        axes[0].set_ylabel(f"V {node} (pu)")
    axes[1].plot(trace.time, trace.current[:, j], lw=1.0, color="C1")
    axes[1].set_ylabel("current (pu)")
    axes[2].step(trace.time, trace.connected[:, j].astype(int), where="post", color="C2")
    axes[2].step(trace.time, trace.stalled[:, j].astype(int), where="post", color="C3", ls="--")
    axes[2].set_ylabel("connected / stalled")
    axes[2].set_yticks([0, 1])
    axes[3].plot(trace.time, trace.temperature[:, j], lw=1.0, color="C4")
    axes[3].set_ylabel("temperature (pu)")
    axes[3].set_xlabel("time (s)")
    for ax in axes:
        ax.grid(alpha=0.3)
    for e in trace.device_events(device):
        for ax in axes:
            ax.axvline(e.time, color="0.6", lw=0.6, ls=":")
        axes[0].annotate(f"{e.kind}:{e.cause}", (e.time, 1.0), xycoords=("data", "axes fraction"),
                         rotation=90, fontsize=6, va="top")
    fig.suptitle(device)
    fig.tight_layout()
    return _save(fig, Path(path), deterministic)


def plot_overlay(traces: dict[str, SimulationTrace], path, *, deterministic=False) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for name, tr in traces.items():
        ax.plot(tr.time, tr.head_voltage, lw=1.2, label=name)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("head voltage (pu)")
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    return _save(fig, Path(path), deterministic)


def default_devices(trace: SimulationTrace, limit: int = 3) -> list[str]:
    """Devices with protection activity, most active first."""
    counts: dict[str, int] = {}
    for e in trace.events:
        if e.kind in ("trip", "reconnect"):
            counts[e.device] = counts.get(e.device, 0) + 1
    return sorted(counts, key=lambda d: (-counts[d], d))[:limit]
