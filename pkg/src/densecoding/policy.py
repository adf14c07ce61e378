"""Numeric tolerances shared by every module, and the package exceptions."""

from __future__ import annotations

from dataclasses import asdict, dataclass


class DensecodingError(Exception):
    """Base class for errors raised by this package."""


class InvariantError(DensecodingError, ValueError):
    """An object violates a structural invariant (trace, positivity, shape...)."""


class SolverError(DensecodingError, RuntimeError):
    """The SDP solver could not produce a usable solution."""


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances used for validation and numerical decisions.

    Every function that needs a tolerance takes a ``policy`` argument that
    defaults to :data:`DEFAULT_POLICY`; nothing reads module-level state.
    """

    sym_tol: float = 1e-10
    psd_tol: float = 1e-9
    trace_tol: float = 1e-10
    completeness_tol: float = 1e-9
    marginal_tol: float = 1e-9
    schmidt_tol: float = 1e-9
    max_dim: int = 256

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_POLICY = NumericPolicy()
