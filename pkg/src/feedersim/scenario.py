"""
Scenario construction: building placement, load scaling, protection
parameter sampling and the JSON scenario file format.

A scenario file has the top-level sections ``feeder``, ``source``,
``buildings``, ``protections`` and ``simulation``, plus optional ``name``,
``description`` and ``motors``.  Unknown keys anywhere are rejected and every
violation found is reported together.  See ``docs/scenario_format.md``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .motors import MotorParams, MotorType, default_params
from .network import Branch, CapBank, FeederModel, Sag, SourceModel
from .protection import (CYCLE, CapBankParams, HeatingMode, OverloadParams, ProtectionType,
                         ThermalParams, VoltageProtectionParams)
from .templates import (CATEGORIES, PROTECTION_NAMES, BuildingTemplate, DeviceSpec,
                        composition_summary, template_by_name)


class ScenarioError(ValueError):
    """Scenario file could not be parsed or failed validation."""

    def __init__(self, problems: list[str], path=None):
        self.problems = list(problems)
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(where + "; ".join(self.problems))


# (lo, hi) closed ranges in volts-pu and seconds; single values are lo == hi
DEFAULT_RANGES: dict[str, dict[str, tuple[float, float]]] = {
    "P1": {"V_tr": (0.8, 0.9), "T_tr": (20 * CYCLE, 2.0), "V_rec": (0.95, 0.95),
           "T_rec": (0.01, 0.01)},
    "P2": {"I_tr": (3.0, 3.0), "T_tr": (0.04, 0.04)},
    "P3": {"T_th": (0.15, 0.15), "T_therm": (10.0, 10.0), "R_stall": (0.054, 0.086)},
    "P4": {"V_tr": (0.4, 0.6), "T_tr": (1 * CYCLE, 5 * CYCLE), "V_rec": (0.65, 0.7),
           "T_rec": (2 * CYCLE, 8.5 * CYCLE)},
    "P5": {"V_tr": (0.5, 0.6), "T_tr": (13 * CYCLE, 15 * CYCLE), "V_rec": (0.95, 0.95),
           "T_rec": (2.0, 2.0)},
}
DEFAULT_MAX_TRIP_COUNT = {"P1": 2, "P4": 10, "P5": 10}

# fixed draw order keeps sampled tables stable across versions
_FIELD_ORDER = {"P1": ("V_tr", "T_tr", "V_rec", "T_rec"), "P2": ("I_tr", "T_tr"),
                "P3": ("T_th", "T_therm", "R_stall"),
                "P4": ("V_tr", "T_tr", "V_rec", "T_rec"), "P5": ("V_tr", "T_tr", "V_rec", "T_rec")}


@dataclass(frozen=True)
class Placement:
    template: BuildingTemplate
    node: str
    scale: float = 1.0
    label: str = ""


@dataclass(frozen=True)
class Device:
    id: str
    building: str
    node: str
    spec: DeviceSpec
    rating_kw: float  # after scaling

    @property
    def category(self) -> str:
        return self.spec.motor_type

    @property
    def protections(self) -> tuple[str, ...]:
        return tuple(sorted(self.spec.protections))


@dataclass
class Scenario:
    feeder: FeederModel
    source: SourceModel
    buildings: list[Placement]
    protection_overrides: dict[str, bool] = field(
        default_factory=lambda: {p: True for p in PROTECTION_NAMES})
    param_ranges: dict[str, dict[str, tuple[float, float]]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_RANGES.items()})
    max_trip_count: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_MAX_TRIP_COUNT))
    rng_seed: int = 0
    duration: float = 10.0
    dt: float = 0.001
    settle_time: float = 0.5
    name: str = "scenario"
    zip_fractions: tuple[float, float, float] = (0.4, 0.3, 0.3)
    static_power_factor: float = 0.95
    motor_overrides: dict[str, dict[str, float]] = field(default_factory=dict)
    thermal_heating: HeatingMode = HeatingMode.STALL
    tolerance: float = 1e-6
    max_iterations: int = 50
    warnings: list[str] = field(default_factory=list)
    source_hash: str = ""

    def problems(self) -> list[str]:
        out = []
        if self.dt <= 0:
            out.append("simulation.dt must be positive")
        if self.duration <= self.dt:
            out.append("simulation.duration must exceed dt")
        if self.settle_time < 0:
            out.append("simulation.settle_time must be non-negative")
        if not 0 <= self.rng_seed < 2 ** 64:
            out.append("simulation.rng_seed must be a 64-bit unsigned integer")
        for b in self.buildings:
            if b.scale <= 0:
                out.append(f"building {b.label}: scale must be positive")
            if b.node not in self.feeder.nodes:
                out.append(f"building {b.label}: unknown node {b.node!r}")
        labels = [b.label for b in self.buildings]
        if len(set(labels)) != len(labels):
            out.append("building labels must be unique")
        zsum = sum(self.zip_fractions)
        if abs(zsum - 1.0) > 1e-9:
            out.append(f"buildings.zip: a_z + a_i + a_p = {zsum:g}, must equal 1")
        if min(self.zip_fractions) < 0:
            out.append("buildings.zip: fractions must be non-negative")
        if not 0 < self.static_power_factor <= 1:
            out.append("buildings.static_power_factor must be in (0, 1]")
        for s in self.source.sag_schedule:
            if s.t_start < self.settle_time:
                out.append(f"sag at t={s.t_start} starts inside the settling hold "
                           f"({self.settle_time} s)")
        for ptype, ranges in self.param_ranges.items():
            for name, (lo, hi) in ranges.items():
                if lo > hi:
                    out.append(f"protections.ranges.{ptype}.{name}: lower bound above upper")
        for ptype in ("P1", "P4", "P5"):
            r = self.param_ranges[ptype]
            if r["V_rec"][0] < r["V_tr"][1]:
                out.append(f"protections.ranges.{ptype}: V_rec range must lie at or above V_tr")
        if self.param_ranges["P2"]["I_tr"][0] <= 1:
            out.append("protections.ranges.P2.I_tr must exceed 1 pu")
        for ptype, n in self.max_trip_count.items():
            if n < 1:
                out.append(f"protections.max_trip_count.{ptype} must be >= 1")
        if self.tolerance <= 0 or self.max_iterations < 1:
            out.append("simulation solver settings must be positive")
        out.extend(f"feeder: {p}" for p in self.feeder.problems())
        out.extend(f"source: {p}" for p in self.source.problems())
        return out

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ScenarioError(problems)

    def devices(self) -> list[Device]:
        return build_devices(self.buildings)


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")


def build_devices(buildings: list[Placement]) -> list[Device]:
    """Flatten placements into uniquely named devices with scaled ratings."""
    out, used = [], set()
    for b in buildings:
        for spec in b.template.devices:
            base = f"{b.label}/{_slug(spec.appliance + ' ' + spec.equipment)}"
            dev_id, k = base, 2
            while dev_id in used:
                dev_id, k = f"{base}_{k}", k + 1
            used.add(dev_id)
            out.append(Device(dev_id, b.label, b.node, spec, spec.rating * b.scale))
    return out


def total_kw(buildings: list[Placement]) -> float:
    return sum(b.template.total_kw * b.scale for b in buildings)


def scale_to_target(buildings: list[Placement], target_MW: float) -> list[Placement]:
    """Apply one uniform factor to every placement so the total equals ``target_MW``."""
    if target_MW <= 0:
        raise ValueError("target_MW must be positive")
    factor = target_MW * 1000.0 / total_kw(buildings)
    return [replace(b, scale=b.scale * factor) for b in buildings]


def placement_summary(buildings: list[Placement]):
    return composition_summary([b.template for b in buildings], [b.scale for b in buildings])


@dataclass(frozen=True)
class DeviceProtections:
    """Sampled settings of every protection a device carries."""

    voltage: dict[str, VoltageProtectionParams]
    overload: OverloadParams | None = None
    thermal: ThermalParams | None = None

    def as_rows(self, device_id: str) -> list[dict]:
        rows = []
        for ptype, p in sorted(self.voltage.items()):
            rows.append(dict(device=device_id, protection=ptype, activated=p.activated,
                             V_tr=p.V_tr, T_tr=p.T_tr, V_rec=p.V_rec, T_rec=p.T_rec,
                             max_trip_count=p.max_trip_count))
        if self.overload is not None:
            rows.append(dict(device=device_id, protection="P2", activated=self.overload.activated,
                             I_tr=self.overload.I_tr, T_tr=self.overload.T_tr))
        if self.thermal is not None:
            rows.append(dict(device=device_id, protection="P3", T_th=self.thermal.T_th,
                             T_therm=self.thermal.T_therm, R_stall=self.thermal.R_stall))
        return rows


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream; reproducible on every platform numpy supports."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_protection_params(devices: list[Device], ranges=None, rng_seed: int = 0, *,
                             enabled: dict[str, bool] | None = None,
                             max_trip_count: dict[str, int] | None = None,
                             work_time: float = 0.0,
                             heating: HeatingMode = HeatingMode.STALL,
                             ) -> dict[str, DeviceProtections]:
    """Draw each device's protection settings uniformly from the closed ranges.

    Every protection listed for a device is sampled whether or not it is
    enabled, so enabling or disabling a protection type never shifts the
    random stream seen by the others.  Disabled protections come back with
    ``activated=False``.
    """
    ranges = ranges or DEFAULT_RANGES
    enabled = enabled or {p: True for p in PROTECTION_NAMES}
    counts = dict(DEFAULT_MAX_TRIP_COUNT, **(max_trip_count or {}))
    rng = make_rng(rng_seed)
    out = {}
    for dev in devices:
        voltage, overload, thermal = {}, None, None
        for ptype in dev.protections:
            draw = {name: float(rng.uniform(*ranges[ptype][name])) for name in _FIELD_ORDER[ptype]}
            active = enabled.get(ptype, True)
            if ProtectionType(ptype).voltage_dependent:
                voltage[ptype] = VoltageProtectionParams(
                    max_trip_count=counts[ptype], activated=active, work_time=work_time, **draw)
            elif ptype == "P2":
                overload = OverloadParams(activated=active, work_time=work_time, **draw)
            elif active:
                thermal = ThermalParams(heating=heating, **draw)
        out[dev.id] = DeviceProtections(voltage, overload, thermal)
    return out


def motor_params_for(device: Device, protections: DeviceProtections | None,
                     overrides: dict[str, dict[str, float]] | None = None) -> MotorParams:
    mtype = MotorType(device.category)
    kwargs = dict((overrides or {}).get(mtype.value, {}))
    if protections is not None and protections.thermal is not None:
        kwargs["R_stall"] = protections.thermal.R_stall
    return default_params(mtype, device.rating_kw, **kwargs)


# ---------------------------------------------------------------------------
# default feeder and shipped scenarios

BUILDING_ORDER = ("Medium Retail", "Large Retail", "Supermarket", "Warehouse", "School", "Hotel")


def default_feeder_dict(segment=(0.01, 0.06), cap_fraction=0.3) -> dict:
    """Eight-node radial reduction: four buildings on laterals at the head, a
    metering node, then school and hotel beyond it."""
    labels = [_slug(n) for n in BUILDING_ORDER]
    nodes = ["head"] + labels[:4] + ["meter"] + labels[4:]
    edges = [("head", l) for l in labels[:4]] + [("head", "meter")] + \
            [("meter", l) for l in labels[4:]]
    caps = []
    for name, label in zip(BUILDING_ORDER, labels):
        caps.append({"id": f"cap_{label}", "node": label,
                     "q_kvar": round(cap_fraction * template_by_name(name).total_kw, 2),
                     "v_max": 1.10, "v_min": 1.05})
    return {
        "base_mva": 10.0, "base_kv": 12.47, "source_node": "head", "nodes": nodes,
        "branches": [{"from": a, "to": b, "r": segment[0], "x": segment[1]} for a, b in edges],
        "transformers": [], "cap_banks": caps,
    }


def builtin_scenario_dict(which: str = "A", seed: int = 42) -> dict:
    which = which.upper()
    enabled = {p: True for p in PROTECTION_NAMES} if which == "A" else \
        {p: p == "P3" for p in PROTECTION_NAMES}
    return {
        "name": f"scenario_{which}",
        "description": ("all building protections active" if which == "A"
                        else "thermal protection (P3) only"),
        "feeder": default_feeder_dict(),
        "source": {"mode": "thevenin", "e_th": 1.0, "z_th": {"r": 0.004, "x": 0.04},
                   "sags": [{"t_start": 1.0, "t_end": 1.1, "v": 0.35}]},
        "buildings": {
            "target_mw": 4.90484,
            "zip": {"a_z": 0.4, "a_i": 0.3, "a_p": 0.3},
            "static_power_factor": 0.95,
            "placements": [{"template": n, "node": _slug(n)} for n in BUILDING_ORDER],
        },
        "protections": {
            "enabled": enabled,
            "ranges": {p: {k: list(v) for k, v in r.items()} for p, r in DEFAULT_RANGES.items()},
            "max_trip_count": dict(DEFAULT_MAX_TRIP_COUNT),
            "thermal_heating": "stall",
        },
        "simulation": {"duration": 10.0, "dt": 0.001, "rng_seed": seed, "settle_time": 0.5},
    }


def builtin_scenario_path(name: str) -> Path:
    """Path of a shipped scenario file (``scenario_A.json`` or ``scenario_B.json``)."""
    if not name.endswith(".json"):
        name += ".json"
    return Path(str(resources.files("feedersim") / "scenarios" / name))


# ---------------------------------------------------------------------------
# file parsing

class _Checker:
    def __init__(self):
        self.problems: list[str] = []

    def keys(self, obj, where, required=(), optional=()):
        if not isinstance(obj, dict):
            self.problems.append(f"{where}: expected an object")
            return False
        allowed = set(required) | set(optional)
        for k in obj:
            if k not in allowed:
                self.problems.append(f"{where}: unknown key {k!r}")
        for k in required:
            if k not in obj:
                self.problems.append(f"{where}: missing required key {k!r}")
        return True

    def number(self, obj, key, where, default=None, positive=False):
        if key not in obj:
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.problems.append(f"{where}.{key}: expected a number")
            return default
        if positive and v <= 0:
            self.problems.append(f"{where}.{key}: must be positive")
        return float(v)

    def impedance(self, obj, where):
        if isinstance(obj, dict) and self.keys(obj, where, ("r", "x")):
            return complex(self.number(obj, "r", where, 0.0), self.number(obj, "x", where, 0.0))
        if isinstance(obj, (list, tuple)) and len(obj) == 2:
            return complex(float(obj[0]), float(obj[1]))
        if not isinstance(obj, dict):
            self.problems.append(f"{where}: expected {{r, x}}")
        return 0j

    def span(self, value, where):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value), float(value)
        if isinstance(value, list) and len(value) == 2 and all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            return float(value[0]), float(value[1])
        self.problems.append(f"{where}: expected a number or [lo, hi]")
        return 0.0, 0.0


def _parse_feeder(c: _Checker, d) -> FeederModel:
    where = "feeder"
    if not c.keys(d, where, ("nodes", "branches"),
                  ("base_mva", "base_kv", "source_node", "transformers", "cap_banks")):
        return FeederModel(nodes=["head"], branches=[])
    branches = []
    for k, b in enumerate(d.get("branches", [])):
        w = f"{where}.branches[{k}]"
        if c.keys(b, w, ("from", "to", "r", "x")):
            branches.append(Branch(str(b["from"]), str(b["to"]),
                                   complex(c.number(b, "r", w, 0.0), c.number(b, "x", w, 0.0))))
    transformers = []
    for k, b in enumerate(d.get("transformers", [])):
        w = f"{where}.transformers[{k}]"
        if c.keys(b, w, ("from", "to", "r", "x"), ("tap",)):
            transformers.append(Branch(str(b["from"]), str(b["to"]),
                                       complex(c.number(b, "r", w, 0.0), c.number(b, "x", w, 0.0)),
                                       c.number(b, "tap", w, 1.0, positive=True)))
    caps = []
    for k, b in enumerate(d.get("cap_banks", [])):
        w = f"{where}.cap_banks[{k}]"
        if c.keys(b, w, ("id", "node", "q_kvar"), ("v_max", "v_min")):
            v_max, v_min = c.number(b, "v_max", w, 1.10), c.number(b, "v_min", w, 1.05)
            if v_max <= v_min:
                c.problems.append(f"{w}: v_max must exceed v_min")
                v_max, v_min = 1.10, 1.05
            caps.append(CapBank(str(b["id"]), str(b["node"]),
                                c.number(b, "q_kvar", w, 0.0), CapBankParams(v_max, v_min)))
    base_kv = d.get("base_kv", 12.47)
    if isinstance(base_kv, (int, float)):
        base_kv = {"feeder": float(base_kv)}
    return FeederModel(nodes=[str(n) for n in d.get("nodes", [])], branches=branches,
                       transformers=transformers, cap_banks=caps,
                       base_mva=c.number(d, "base_mva", where, 10.0, positive=True),
                       base_kv=base_kv, source_node=d.get("source_node"))


def _parse_source(c: _Checker, d) -> SourceModel:
    where = "source"
    if not c.keys(d, where, (), ("mode", "e_th", "z_th", "sags")):
        return SourceModel()
    mode = d.get("mode", "thevenin")
    if mode not in ("stiff", "thevenin"):
        c.problems.append(f"source.mode: expected 'stiff' or 'thevenin', got {mode!r}")
        mode = "thevenin"
    z_th = c.impedance(d["z_th"], "source.z_th") if "z_th" in d else (
        0j if mode == "stiff" else 0.004 + 0.04j)
    sags = []
    for k, s in enumerate(d.get("sags", [])):
        w = f"source.sags[{k}]"
        if c.keys(s, w, ("t_start", "t_end", "v")):
            sags.append(Sag(c.number(s, "t_start", w, 0.0), c.number(s, "t_end", w, 0.0),
                            c.number(s, "v", w, 1.0)))
    return SourceModel(mode=mode, E_th=complex(c.number(d, "e_th", where, 1.0)), Z_th=z_th,
                       sag_schedule=sags)


def _parse_template(c: _Checker, d, where) -> BuildingTemplate | None:
    if not c.keys(d, where, ("name", "devices")):
        return None
    devices = []
    for k, dev in enumerate(d["devices"]):
        w = f"{where}.devices[{k}]"
        if not c.keys(dev, w, ("motor_type", "rating"), ("appliance", "equipment", "protections")):
            continue
        try:
            devices.append(DeviceSpec(str(dev.get("appliance", "")), str(dev.get("equipment", "")),
                                      dev["motor_type"], frozenset(dev.get("protections", [])),
                                      float(dev["rating"])))
        except (ValueError, TypeError) as exc:
            c.problems.append(f"{w}: {exc}")
    return BuildingTemplate(str(d["name"]), tuple(devices))


def _parse_buildings(c: _Checker, d):
    where = "buildings"
    out = dict(placements=[], target_mw=None, zip=(0.4, 0.3, 0.3), pf=0.95)
    if not c.keys(d, where, ("placements",),
                  ("target_mw", "zip", "static_power_factor", "templates")):
        return out
    custom = {}
    for k, t in enumerate(d.get("templates", [])):
        tpl = _parse_template(c, t, f"buildings.templates[{k}]")
        if tpl is not None:
            custom[tpl.name.lower()] = tpl
    labels_seen: dict[str, int] = {}
    for k, p in enumerate(d["placements"]):
        w = f"buildings.placements[{k}]"
        if not c.keys(p, w, ("template", "node"), ("scale", "label")):
            continue
        name = str(p["template"])
        tpl = custom.get(name.lower())
        if tpl is None:
            try:
                tpl = template_by_name(name)
            except KeyError:
                c.problems.append(f"{w}.template: unknown building template {name!r}")
                continue
        label = p.get("label") or _slug(tpl.name)
        if label in labels_seen and "label" not in p:
            labels_seen[label] += 1
            label = f"{label}_{labels_seen[label]}"
        else:
            labels_seen.setdefault(label, 1)
        out["placements"].append(Placement(tpl, str(p["node"]), c.number(p, "scale", w, 1.0), label))
    out["target_mw"] = c.number(d, "target_mw", where, None, positive=True)
    if "zip" in d and c.keys(d["zip"], "buildings.zip", ("a_z", "a_i", "a_p")):
        z = d["zip"]
        out["zip"] = tuple(c.number(z, k, "buildings.zip", 0.0) for k in ("a_z", "a_i", "a_p"))
    out["pf"] = c.number(d, "static_power_factor", where, 0.95)
    return out


_MOTOR_FIELDS = {f for f in MotorParams.__dataclass_fields__ if f not in ("motor_type", "rated_power")}


def _parse_motors(c: _Checker, d) -> dict:
    if not c.keys(d, "motors", (), [m.value for m in MotorType]):
        return {}
    out = {}
    for mtype, fields in d.items():
        w = f"motors.{mtype}"
        if c.keys(fields, w, (), sorted(_MOTOR_FIELDS)):
            out[mtype] = {k: c.number(fields, k, w) for k in fields}
    return out


def _parse_protections(c: _Checker, d):
    where = "protections"
    out = dict(enabled={p: True for p in PROTECTION_NAMES},
               ranges={k: dict(v) for k, v in DEFAULT_RANGES.items()},
               max_trip_count=dict(DEFAULT_MAX_TRIP_COUNT), heating=HeatingMode.STALL)
    if not c.keys(d, where, (), ("enabled", "ranges", "max_trip_count", "thermal_heating")):
        return out
    if "enabled" in d and c.keys(d["enabled"], "protections.enabled", (), PROTECTION_NAMES):
        for p, flag in d["enabled"].items():
            if not isinstance(flag, bool):
                c.problems.append(f"protections.enabled.{p}: expected true/false")
            else:
                out["enabled"][p] = flag
    if "ranges" in d and c.keys(d["ranges"], "protections.ranges", (), PROTECTION_NAMES):
        for p, r in d["ranges"].items():
            w = f"protections.ranges.{p}"
            if c.keys(r, w, (), DEFAULT_RANGES[p]):
                for name, v in r.items():
                    out["ranges"][p][name] = c.span(v, f"{w}.{name}")
    if "max_trip_count" in d and c.keys(d["max_trip_count"], "protections.max_trip_count",
                                        (), ("P1", "P4", "P5")):
        for p, v in d["max_trip_count"].items():
            if isinstance(v, bool) or not isinstance(v, int):
                c.problems.append(f"protections.max_trip_count.{p}: expected an integer")
            else:
                out["max_trip_count"][p] = v
    if "thermal_heating" in d:
        try:
            out["heating"] = HeatingMode(d["thermal_heating"])
        except ValueError:
            c.problems.append("protections.thermal_heating: expected 'stall' or 'total'")
    return out


def _parse_simulation(c: _Checker, d):
    where = "simulation"
    out = dict(duration=10.0, dt=0.001, rng_seed=None, settle_time=0.5, tolerance=1e-6,
               max_iterations=50)
    if not c.keys(d, where, (), ("duration", "dt", "rng_seed", "settle_time", "tolerance",
                                 "max_iterations")):
        return out
    for k in ("duration", "dt", "settle_time", "tolerance"):
        out[k] = c.number(d, k, where, out[k])
    for k in ("rng_seed", "max_iterations"):
        if k in d:
            v = d[k]
            if isinstance(v, bool) or not isinstance(v, int):
                c.problems.append(f"simulation.{k}: expected an integer")
            else:
                out[k] = v
    return out


def scenario_from_dict(data: dict, *, source_hash: str = "", path=None) -> Scenario:
    """Build and fully validate a scenario from its parsed JSON document."""
    c = _Checker()
    if not c.keys(data, "scenario", ("feeder", "buildings"),
                  ("name", "description", "source", "protections", "simulation", "motors")):
        raise ScenarioError(c.problems, path)
    feeder = _parse_feeder(c, data["feeder"])
    source = _parse_source(c, data.get("source", {}))
    bld = _parse_buildings(c, data["buildings"])
    motors = _parse_motors(c, data.get("motors", {}))
    prot = _parse_protections(c, data.get("protections", {}))
    sim = _parse_simulation(c, data.get("simulation", {}))
    warnings = []
    seed = sim["rng_seed"]
    if seed is None:
        seed = 0
        warnings.append("simulation.rng_seed missing; defaulting to 0")
    placements = bld["placements"]
    if not placements:
        c.problems.append("buildings.placements: at least one building is required")
    elif bld["target_mw"] is not None:
        placements = scale_to_target(placements, bld["target_mw"])
    for mtype, fields in motors.items():
        try:
            default_params(mtype, 1.0, **fields)
        except (ValueError, TypeError) as exc:
            c.problems.append(f"motors.{mtype}: {exc}")
    scenario = Scenario(
        feeder=feeder, source=source, buildings=placements,
        protection_overrides=prot["enabled"], param_ranges=prot["ranges"],
        max_trip_count=prot["max_trip_count"], rng_seed=seed, duration=sim["duration"],
        dt=sim["dt"], settle_time=sim["settle_time"], name=str(data.get("name", "scenario")),
        zip_fractions=bld["zip"], static_power_factor=bld["pf"], motor_overrides=motors,
        thermal_heating=prot["heating"], tolerance=sim["tolerance"],
        max_iterations=sim["max_iterations"], warnings=warnings, source_hash=source_hash,
    )
    feeder.attachments = {d.id: d.node for d in build_devices(placements)} if placements else {}
    problems = c.problems + scenario.problems()
    if problems:
        raise ScenarioError(problems, path)
    return scenario


def load_scenario(path) -> Scenario:
    """Read, parse and validate a scenario file.

    JSON syntax errors are reported with line and column; semantic problems
    are all collected into one ``ScenarioError``.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError([f"cannot read scenario file: {exc.strerror}"], path) from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"JSON parse error at line {exc.lineno}, column {exc.colno}: "
                             f"{exc.msg}"], path) from exc
    except UnicodeDecodeError as exc:
        raise ScenarioError([f"file is not valid UTF-8 text: {exc}"], path) from exc
    return scenario_from_dict(data, source_hash=hashlib.sha256(raw).hexdigest(), path=path)


def with_overrides(scenario: Scenario, *, seed=None, duration=None, dt=None) -> Scenario:
    """Copy of ``scenario`` with run-time overrides applied and re-validated."""
    changes = {}
    if seed is not None:
        changes["rng_seed"] = seed
    if duration is not None:
        changes["duration"] = duration
    if dt is not None:
        changes["dt"] = dt
    if not changes:
        return scenario
    out = replace(scenario, **changes)
    if seed is not None:
        out.warnings = [w for w in out.warnings if "rng_seed" not in w]
    out.validate()
    return out


__all__ = [
    "CATEGORIES", "DEFAULT_RANGES", "Device", "DeviceProtections", "Placement", "Scenario",
    "ScenarioError", "build_devices", "builtin_scenario_dict", "builtin_scenario_path",
    "load_scenario", "sample_protection_params", "scale_to_target", "scenario_from_dict",
    "with_overrides",
]
