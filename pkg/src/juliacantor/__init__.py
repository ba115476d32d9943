"""Finite-depth connectivity analysis of polynomial Julia sets.

The package decides, at an explicitly surfaced combinatorial depth,
whether the Julia set of a complex polynomial is a Cantor set.  The
pipeline: Green function and escape certificates -> puzzle partition on
adaptive grids -> tableau calculus for the bounded critical points ->
critical nest with a return-time ledger and annulus-modulus evidence.
Every verdict is depth- and budget-relative; nothing is extrapolated
past the computed horizon.
"""

from .polynomials import (
    CriticalPoint,
    GreenValue,
    Polynomial,
    bounded_critical_points,
    critical_points,
    escape_radius,
    evaluate,
    green,
    green_batch,
)

__version__ = "0.1.0"

__all__ = [
    "Polynomial",
    "CriticalPoint",
    "GreenValue",
    "evaluate",
    "critical_points",
    "escape_radius",
    "green",
    "green_batch",
    "bounded_critical_points",
]
