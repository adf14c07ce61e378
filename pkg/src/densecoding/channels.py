"""Choi operators of channels acting on Alice's system.

Convention: ``L = sum_ij |i><j| ⊗ Lambda(|i><j|)`` on ``H_A ⊗ H_A'``, so
trace preservation reads ``tr_A'(L) = I_A`` and
``Lambda(rho) = tr_A[(rho^T ⊗ I_A') L]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, hermitian_part, is_hermitian, partial_trace, psd_power
from .policy import DEFAULT_POLICY, InvariantError, NumericPolicy
from .states import DensityOperator

__all__ = [
    "ChoiOperator",
    "apply_choi",
    "apply_local_channel",
    "apply_local_unitary",
    "is_unitary",
]


@dataclass(frozen=True, eq=False)
class ChoiOperator:
    matrix: np.ndarray
    d_in: int
    d_out: int | None = None
    policy: NumericPolicy = field(default=DEFAULT_POLICY, repr=False)

    def __post_init__(self):
        d_in = int(self.d_in)
        d_out = d_in if self.d_out is None else int(self.d_out)
        m = as_matrix(self.matrix, self.policy)
        if m.shape != (d_in * d_out, d_in * d_out):
            raise InvariantError(f"Choi matrix shape {m.shape} does not match {(d_in, d_out)}")
        if not is_hermitian(m, self.policy.sym_tol):
            raise InvariantError("Choi matrix is not Hermitian")
        m = hermitian_part(m)
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -self.policy.psd_tol:
            raise InvariantError(f"Choi matrix not completely positive (min eigenvalue {lo:.3e})")
        tp = partial_trace(m, (d_in, d_out), keep="A", policy=self.policy)
        err = float(np.abs(tp - np.eye(d_in)).max())
        if err > self.policy.psd_tol:
            raise InvariantError(f"Choi matrix not trace preserving (error {err:.3e})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "d_in", d_in)
        object.__setattr__(self, "d_out", d_out)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_unitary(cls, u, policy: NumericPolicy = DEFAULT_POLICY) -> "ChoiOperator":
        u = np.asarray(u, dtype=complex)
        d = u.shape[0]
        # (I ⊗ U) |Phi>, |Phi> = sum_i |ii> unnormalized
        v = u.T.reshape(-1)
        return cls(np.outer(v, v.conj()), d, d, policy)

    @classmethod
    def identity(cls, d: int, policy: NumericPolicy = DEFAULT_POLICY) -> "ChoiOperator":
        return cls.from_unitary(np.eye(d), policy)

    @classmethod
    def depolarizing(cls, d: int, policy: NumericPolicy = DEFAULT_POLICY) -> "ChoiOperator":
        """Channel sending every input to ``I/d``."""
        return cls(np.eye(d * d) / d, d, d, policy)

    @classmethod
    def repaired(cls, matrix, d_in: int, d_out: int | None = None,
                 policy: NumericPolicy = DEFAULT_POLICY) -> "ChoiOperator":
        """Make a numerically near-TP, near-PSD matrix exactly trace preserving.

        Conjugates the input factor by ``T^{-1/2}`` with ``T = tr_A'(L)``,
        which keeps positivity and makes ``tr_A'`` the identity.
        """
        d_out = d_in if d_out is None else d_out
        m = hermitian_part(np.asarray(matrix, dtype=complex))
        w, v = np.linalg.eigh(m)
        m = (v * np.clip(w, 0.0, None)) @ v.conj().T
        t = partial_trace(m, (d_in, d_out), keep="A", policy=policy)
        f = np.kron(psd_power(t, -0.5), np.eye(d_out))
        return cls(f @ m @ f.conj().T, d_in, d_out, policy)

    def to_dict(self) -> dict:
        return {
            "type": "choi",
            "d_in": self.d_in,
            "d_out": self.d_out,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }


def apply_choi(choi: ChoiOperator, rho_a):
    """``Lambda(rho) = tr_A[(rho^T ⊗ I) L]``; returns a DensityOperator if given one."""
    r = as_matrix(rho_a, choi.policy)
    if r.shape != (choi.d_in, choi.d_in):
        raise InvariantError(f"input of shape {r.shape} does not match channel input {choi.d_in}")
    t = choi.matrix.reshape(choi.d_in, choi.d_out, choi.d_in, choi.d_out)
    out = np.einsum("ij,iajb->ab", r, t)
    if isinstance(rho_a, DensityOperator):
        return DensityOperator(out, choi.d_out, 1, choi.policy)
    return out


def apply_local_channel(choi: ChoiOperator, rho: DensityOperator) -> DensityOperator:
    """``(Lambda ⊗ id_B)[rho]`` for a channel on Alice's factor."""
    if rho.d_a != choi.d_in:
        raise InvariantError(f"channel input {choi.d_in} does not match d_a={rho.d_a}")
    d_a, d_b, d_o = rho.d_a, rho.d_b, choi.d_out
    r = rho.matrix.reshape(d_a, d_b, d_a, d_b)
    t = choi.matrix.reshape(d_a, d_o, d_a, d_o)
    out = np.einsum("ibjc,iajd->abdc", r, t).reshape(d_o * d_b, d_o * d_b)
    return DensityOperator(out, d_o, d_b, rho.policy)


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= tol)


def apply_local_unitary(u: np.ndarray, rho: DensityOperator) -> DensityOperator:
    full = np.kron(np.asarray(u, dtype=complex), np.eye(rho.d_b))
    return DensityOperator(full @ rho.matrix @ full.conj().T, rho.d_a, rho.d_b, rho.policy)
