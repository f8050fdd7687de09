"""Bounded electricity estimates for the Ethereum and Filecoin networks."""

from .units import BoundedEstimate, TimeSeries, bounded_map, convert, integrate_power

__version__ = "0.1.0"
__all__ = ["BoundedEstimate", "TimeSeries", "bounded_map", "convert", "integrate_power", "__version__"]
