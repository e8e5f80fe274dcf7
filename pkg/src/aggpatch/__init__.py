"""Simulation and verification tools for symmetric aggregation patches."""
from .graphstate import SampledGraph, NormReport

__all__ = ["SampledGraph", "NormReport"]
__version__ = "0.1.0"
