"""Distributed multiway join engine: leapfrog joins over hash-partitioned
sorted-array tries, with decomposition-aware plan search."""

__version__ = "0.1.0"
