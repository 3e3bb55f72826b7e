"""Incompressible heat-conducting variable-density flow with temperature-dependent viscosity."""

__version__ = "0.1.0"
