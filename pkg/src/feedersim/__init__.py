"""Phasor-domain feeder simulation with building-level motor protection."""

__version__ = "0.1.0"
