"""Superdense coding as a prepare-and-measure scenario.

Simulation of encodings and measurements, analytic entanglement witnesses
based on the success probability, and see-saw lower bounds computed with a
small dense SDP solver.
"""

from .policy import (
    DEFAULT_POLICY,
    DensecodingError,
    InvariantError,
    NumericPolicy,
    SolverError,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_POLICY",
    "DensecodingError",
    "InvariantError",
    "NumericPolicy",
    "SolverError",
    "__version__",
]
