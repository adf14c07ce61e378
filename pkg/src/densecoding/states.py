"""Bipartite states: validated containers, standard families and analyzers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.stats import unitary_group

from .linalg import as_matrix, hermitian_part, is_hermitian, partial_trace
from .policy import DEFAULT_POLICY, InvariantError, NumericPolicy

__all__ = [
    "DensityOperator",
    "PureState",
    "SchmidtDecomposition",
    "SingletFraction",
    "max_entangled",
    "isotropic",
    "werner",
    "swap_operator",
    "schmidt_decompose",
    "schmidt_state",
    "fidelity_phi_plus",
    "singlet_fraction",
    "twirl_to_isotropic",
    "random_unitary",
    "random_pure_state",
    "random_density",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A unit-trace positive semidefinite operator on ``C^d_a ⊗ C^d_b``.

    Construction validates the invariants under ``policy``; the stored
    matrix is an exact Hermitian copy and is read-only.
    """

    matrix: np.ndarray
    d_a: int
    d_b: int = 1
    policy: NumericPolicy = field(default=DEFAULT_POLICY, repr=False)

    def __post_init__(self):
        d_a, d_b = int(self.d_a), int(self.d_b)
        if d_a < 1 or d_b < 1:
            raise InvariantError(f"local dimensions must be positive, got {(d_a, d_b)}")
        m = as_matrix(self.matrix, self.policy)
        if m.shape != (d_a * d_b, d_a * d_b):
            raise InvariantError(f"matrix shape {m.shape} does not match dims {(d_a, d_b)}")
        if not is_hermitian(m, self.policy.sym_tol):
            raise InvariantError("density operator is not Hermitian")
        m = hermitian_part(m)
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > self.policy.trace_tol:
            raise InvariantError(f"density operator has trace {tr!r}, expected 1")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -self.policy.psd_tol:
            raise InvariantError(f"density operator has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "d_a", d_a)
        object.__setattr__(self, "d_b", d_b)
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dims(self) -> tuple[int, int]:
        return (self.d_a, self.d_b)

    @property
    def dim(self) -> int:
        return self.d_a * self.d_b

    def reduced(self, keep="A") -> np.ndarray:
        return partial_trace(self.matrix, self.dims, keep, self.policy)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def conjugated(self, unitary: np.ndarray) -> "DensityOperator":
        u = np.asarray(unitary, dtype=complex)
        return DensityOperator(u @ self.matrix @ u.conj().T, self.d_a, self.d_b, self.policy)

    def to_dict(self) -> dict:
        return {
            "d_a": self.d_a,
            "d_b": self.d_b,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, policy: NumericPolicy = DEFAULT_POLICY) -> "DensityOperator":
        m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        return cls(m, int(data["d_a"]), int(data["d_b"]), policy)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    d_a: int
    d_b: int = 1
    policy: NumericPolicy = field(default=DEFAULT_POLICY, repr=False)

    def __post_init__(self):
        d_a, d_b = int(self.d_a), int(self.d_b)
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.size != d_a * d_b:
            raise InvariantError(f"{v.size} amplitudes do not match dims {(d_a, d_b)}")
        if d_a * d_b > self.policy.max_dim:
            raise InvariantError(f"dimension {d_a * d_b} exceeds {self.policy.max_dim}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise InvariantError(f"state has norm {np.linalg.norm(v)!r}")
        object.__setattr__(self, "d_a", d_a)
        object.__setattr__(self, "d_b", d_b)
        object.__setattr__(self, "amplitudes", _frozen(v))

    @property
    def dims(self) -> tuple[int, int]:
        return (self.d_a, self.d_b)

    def amplitude_matrix(self) -> np.ndarray:
        return self.amplitudes.reshape(self.d_a, self.d_b)

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> DensityOperator:
        return DensityOperator(self.projector(), self.d_a, self.d_b, self.policy)


class SchmidtDecomposition(NamedTuple):
    coefficients: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    def reconstruct(self) -> np.ndarray:
        c, u, v = self.coefficients, self.left_vectors, self.right_vectors
        return np.einsum("k,ik,jk->ij", c, u, v).reshape(-1)


def max_entangled(d: int, policy: NumericPolicy = DEFAULT_POLICY) -> PureState:
    """``(1/sqrt(d)) sum_i |ii>``."""
    d = int(d)
    if d < 1:
        raise InvariantError("dimension must be positive")
    if d * d > policy.max_dim:
        raise InvariantError(f"dimension {d * d} exceeds {policy.max_dim}")
    return PureState(np.eye(d).reshape(-1) / np.sqrt(d), d, d, policy)


def isotropic(d: int, chi: float, policy: NumericPolicy = DEFAULT_POLICY) -> DensityOperator:
    """Mixture ``(1 - chi) I / d^2 + chi |Phi+><Phi+|``; PSD for chi in [-1/(d^2-1), 1]."""
    d = int(d)
    if d < 2:
        raise InvariantError("isotropic states need d >= 2")
    lo = -1.0 / (d * d - 1)
    if not (lo - 1e-12 <= chi <= 1.0 + 1e-12):
        raise InvariantError(f"chi={chi} outside the valid range [{lo}, 1]")
    phi = max_entangled(d, policy).projector()
    m = (1.0 - chi) / d**2 * np.eye(d * d) + chi * phi
    return DensityOperator(m, d, d, policy)


def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1.0
    return s


def werner(d: int, alpha: float, policy: NumericPolicy = DEFAULT_POLICY) -> DensityOperator:
    """``(I - alpha S) / (d^2 - alpha d)`` with ``S`` the swap operator."""
    d = int(d)
    if d < 2:
        raise InvariantError("Werner states need d >= 2")
    if not (-1.0 <= alpha <= 1.0):
        raise InvariantError(f"alpha={alpha} outside [-1, 1]")
    m = (np.eye(d * d) - alpha * swap_operator(d)) / (d * d - alpha * d)
    return DensityOperator(m, d, d, policy)


def schmidt_decompose(psi: PureState) -> SchmidtDecomposition:
    """Schmidt form via SVD of the amplitude matrix.

    Coefficients at or below ``policy.schmidt_tol`` are dropped, so the
    length of ``coefficients`` is the Schmidt rank.
    """
    u, s, vh = np.linalg.svd(psi.amplitude_matrix(), full_matrices=False)
    keep = s > psi.policy.schmidt_tol
    s = s[keep]
    s = s / np.linalg.norm(s)
    return SchmidtDecomposition(s, u[:, keep], vh[keep, :].T)


def schmidt_state(coefficients, d_a: int | None = None, d_b: int | None = None,
                  policy: NumericPolicy = DEFAULT_POLICY) -> PureState:
    """``sum_j c_j |jj>`` padded into ``C^d_a ⊗ C^d_b``."""
    c = np.asarray(coefficients, dtype=float)
    d_a = len(c) if d_a is None else int(d_a)
    d_b = d_a if d_b is None else int(d_b)
    if len(c) > min(d_a, d_b):
        raise InvariantError("more Schmidt coefficients than the local dimensions allow")
    amp = np.zeros((d_a, d_b), dtype=complex)
    amp[np.arange(len(c)), np.arange(len(c))] = c
    return PureState(amp.reshape(-1), d_a, d_b, policy)


def _require_square(rho: DensityOperator) -> int:
    if rho.d_a != rho.d_b:
        raise InvariantError(f"need d_a == d_b, got {rho.dims}")
    return rho.d_a


def fidelity_phi_plus(rho: DensityOperator) -> float:
    d = _require_square(rho)
    phi = np.eye(d).reshape(-1) / np.sqrt(d)
    return float(np.real(phi.conj() @ rho.matrix @ phi))


class SingletFraction(NamedTuple):
    """Lower bound on the maximal singlet fraction.

    ``unitary_a`` rotates Alice's side so that ``(U ⊗ I)|Phi+>`` attains
    ``value``; Bob's unitary is the identity without loss of generality
    because ``(U1 ⊗ U2)|Phi+> = (U1 U2^T ⊗ I)|Phi+>``.
    """

    value: float
    unitary_a: np.ndarray
    converged: bool


def _polar(b: np.ndarray) -> np.ndarray:
    w, _, vh = np.linalg.svd(b)
    return w @ vh


def singlet_fraction(rho: DensityOperator, tol: float = 1e-12, restarts: int = 20,
                     seed: int = 0, max_iters: int = 2000) -> SingletFraction:
    """Maximize ``<Phi|rho|Phi>`` over ``|Phi> = (U ⊗ I)|Phi+>``.

    Alternates on the bilinear form ``Re <Phi_U|rho|Phi_V>``: with one
    unitary fixed the other is the polar factor of a d x d matrix.  By
    Cauchy-Schwarz the bilinear value never exceeds the larger of the two
    diagonal values, which are reported.  Restart 0 starts from the
    identity, so the result is never below :func:`fidelity_phi_plus`.
    """
    d = _require_square(rho)
    r = rho.matrix

    def overlap(u):
        v = u.reshape(-1) / np.sqrt(d)
        return float(np.real(v.conj() @ r @ v))

    def apply(u):
        return (r @ u.reshape(-1)).reshape(d, d)

    best_val, best_u, all_converged = -np.inf, np.eye(d, dtype=complex), True
    for k in range(max(1, restarts)):
        if k == 0:
            v = np.eye(d, dtype=complex)
        else:
            v = random_unitary(d, np.random.default_rng([seed, k]))
        bilinear = -np.inf
        converged = False
        for _ in range(max_iters):
            u = _polar(apply(v))
            v = _polar(apply(u))
            new = float(np.real(np.vdot(u.reshape(-1), apply(v).reshape(-1)))) / d
            if new - bilinear < tol:
                converged = True
                break
            bilinear = new
        all_converged &= converged
        for cand in (u, v):
            val = overlap(cand)
            if val > best_val:
                best_val, best_u = val, cand
    return SingletFraction(best_val, best_u, all_converged)


def twirl_to_isotropic(rho: DensityOperator) -> DensityOperator:
    """Isotropic state with the same ``Phi+`` fidelity as ``rho``."""
    d = _require_square(rho)
    f = fidelity_phi_plus(rho)
    chi = (f * d * d - 1.0) / (d * d - 1.0)
    assert chi >= -1.0 / (d * d - 1) - 1e-12, "fidelity below zero for a valid state"
    return isotropic(d, max(chi, -1.0 / (d * d - 1)), rho.policy)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(d, random_state=rng)


def random_pure_state(d_a: int, d_b: int, rng: np.random.Generator, rank: int | None = None,
                      policy: NumericPolicy = DEFAULT_POLICY) -> PureState:
    """Random pure state; with ``rank`` given the Schmidt rank is exactly ``rank``."""
    if rank is None:
        v = rng.normal(size=d_a * d_b) + 1j * rng.normal(size=d_a * d_b)
        return PureState(v / np.linalg.norm(v), d_a, d_b, policy)
    c = rng.random(rank) + 0.05
    c = np.sort(c / np.linalg.norm(c))[::-1]
    amp = np.zeros((d_a, d_b), dtype=complex)
    amp[np.arange(rank), np.arange(rank)] = c
    amp = random_unitary(d_a, rng) @ amp @ random_unitary(d_b, rng).T
    return PureState(amp.reshape(-1), d_a, d_b, policy)


def random_density(d_a: int, d_b: int, rng: np.random.Generator, rank: int | None = None,
                   policy: NumericPolicy = DEFAULT_POLICY) -> DensityOperator:
    n = d_a * d_b
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real, d_a, d_b, policy)
