"""Dense complex matrix kernel.

Matrices are plain ``numpy`` arrays of complex dtype.  Bipartite operators
are ordered ``A ⊗ B`` with row-major (``numpy.kron``) index convention, so
basis state ``|i j>`` has flat index ``i * d_b + j``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .policy import DEFAULT_POLICY, InvariantError, NumericPolicy

__all__ = [
    "HermitianEig",
    "as_matrix",
    "kron",
    "partial_trace",
    "partial_transpose",
    "herm_eig",
    "hermitian_part",
    "is_hermitian",
    "min_eigenvalue",
    "psd_power",
    "trace_norm",
    "trace_distance",
    "dagger",
]


class HermitianEig(NamedTuple):
    """Eigenvalues in descending order and matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(x, policy: NumericPolicy = DEFAULT_POLICY, square: bool = True) -> np.ndarray:
    """Coerce ``x`` (array-like or object with ``.matrix``) to a finite complex 2-d array."""
    x = getattr(x, "matrix", x)
    a = np.asarray(x, dtype=complex)
    if a.ndim != 2:
        raise InvariantError(f"expected a 2-d matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise InvariantError(f"expected a square matrix, got shape {a.shape}")
    if max(a.shape) > policy.max_dim:
        raise InvariantError(
            f"matrix of shape {a.shape} exceeds the maximum dimension {policy.max_dim}"
        )
    if not np.all(np.isfinite(a)):
        raise InvariantError("matrix has non-finite entries")
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def kron(a, b, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    a = as_matrix(a, policy, square=False)
    b = as_matrix(b, policy, square=False)
    shape = (a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    if max(shape) > policy.max_dim:
        raise InvariantError(
            f"kron of {a.shape} and {b.shape} gives {shape}, "
            f"above the maximum dimension {policy.max_dim}"
        )
    return np.kron(a, b)


def _check_dims(x: np.ndarray, dims) -> tuple[int, int]:
    d_a, d_b = (int(d) for d in dims)
    if d_a < 1 or d_b < 1 or x.shape != (d_a * d_b, d_a * d_b):
        raise InvariantError(f"dims {(d_a, d_b)} do not match matrix shape {x.shape}")
    return d_a, d_b


def _subsystem(name) -> str:
    key = str(name).upper()
    if key not in ("A", "B"):
        raise ValueError(f"subsystem must be 'A' or 'B', got {name!r}")
    return key


def partial_trace(x, dims, keep="A", policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Trace out one factor of a bipartite operator, keeping subsystem ``keep``."""
    x = as_matrix(x, policy)
    d_a, d_b = _check_dims(x, dims)
    t = x.reshape(d_a, d_b, d_a, d_b)
    if _subsystem(keep) == "A":
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def partial_transpose(x, dims, subsystem="A", policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    x = as_matrix(x, policy)
    d_a, d_b = _check_dims(x, dims)
    t = x.reshape(d_a, d_b, d_a, d_b)
    if _subsystem(subsystem) == "A":
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return t.reshape(d_a * d_b, d_a * d_b)


def hermitian_part(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dagger(x))


def is_hermitian(x, tol: float = DEFAULT_POLICY.sym_tol) -> bool:
    x = np.asarray(x)
    return bool(np.linalg.norm(x - dagger(x)) <= tol * max(1.0, np.linalg.norm(x)))


def herm_eig(h, policy: NumericPolicy = DEFAULT_POLICY) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    The input is symmetrized before factorization; asymmetry above
    ``policy.sym_tol`` (relative Frobenius norm) is rejected.
    """
    h = as_matrix(h, policy)
    if not is_hermitian(h, policy.sym_tol):
        err = np.linalg.norm(h - h.conj().T)
        raise InvariantError(f"matrix is not Hermitian (||H - H^dag||_F = {err:.3e})")
    try:
        w, v = np.linalg.eigh(hermitian_part(h))
    except np.linalg.LinAlgError as exc:
        raise InvariantError(f"eigendecomposition did not converge: {exc}") from exc
    return HermitianEig(w[::-1].copy(), v[:, ::-1].copy())


def min_eigenvalue(h: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(np.asarray(h)))[0])


def psd_power(h: np.ndarray, power: float) -> np.ndarray:
    """``h ** power`` for a positive definite Hermitian matrix."""
    w, v = np.linalg.eigh(hermitian_part(h))
    if w[0] <= 0 and power < 0:
        raise InvariantError("negative power of a singular matrix")
    w = np.clip(w, 0.0, None)
    return (v * w**power) @ v.conj().T


def trace_norm(x) -> float:
    """Sum of singular values."""
    x = np.asarray(getattr(x, "matrix", x), dtype=complex)
    return float(np.sum(np.linalg.svd(x, compute_uv=False)))


def trace_distance(rho, sigma, policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Half the trace norm of ``rho - sigma``."""
    a = as_matrix(rho, policy)
    b = as_matrix(sigma, policy)
    if a.shape != b.shape:
        raise InvariantError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return 0.5 * trace_norm(a - b)
