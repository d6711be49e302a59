"""Dual-domain Simplex runtime-assurance simulator."""

__version__ = "0.1.0"
