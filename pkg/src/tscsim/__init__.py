"""Timed sequential consistency on a replica circle: protocol, clocks and simulator."""

__version__ = "0.1.0"
