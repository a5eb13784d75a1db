"""Interconnect design-space exploration for tiled in-memory-computing DNN accelerators."""

__version__ = "0.1.0"
