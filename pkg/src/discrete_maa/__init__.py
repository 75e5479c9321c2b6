"""Enumerate every discrete near-optimal design of an energy-system MILP.

The pipeline solves the cost-optimal design problem, maps the relaxed
near-optimal design space by directional LPs until the volume gap between
inner hull and outer polyhedron is small, then sorts the capacity lattice
into near-optimal and rejected designs.
"""

__version__ = "0.1.0"
