"""Fault detection and isolation for hybrid systems modelled as hybrid bond graphs."""

__version__ = "0.1.0"
