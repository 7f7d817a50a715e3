"""Fluid-RIS assisted ambient backscatter: channel synthesis, rates and PSO placement."""

__version__ = "0.1.0"
