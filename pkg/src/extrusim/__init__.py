"""Characteristics-based simulator and boundary-control synthesis for an
isothermal single-screw extruder model."""

__version__ = "0.1.0"
