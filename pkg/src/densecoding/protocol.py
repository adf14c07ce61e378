"""Prepare-and-measure model of superdense coding.

Alice encodes ``x`` by a local operation on her half of a shared state and
sends her system to Bob, who measures both halves.  Probabilities are
stored as ``p[b, x, y]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np

from .channels import ChoiOperator, apply_local_channel, apply_local_unitary, is_unitary
from .linalg import hermitian_part, trace_norm
from .policy import DEFAULT_POLICY, InvariantError, NumericPolicy
from .states import DensityOperator, PureState, max_entangled

__all__ = [
    "ScenarioShape",
    "Povm",
    "PreparationFamily",
    "Behavior",
    "Encoding",
    "weyl",
    "prepare",
    "behavior",
    "p_suc",
    "v_n",
    "pair_settings",
    "canonical_sdc_protocol",
    "bell_basis_povm",
    "helstrom_povm",
    "helstrom_povms",
    "vn_weyl_preparations",
    "omega_purity",
]

Encoding = Union[np.ndarray, ChoiOperator]


class ScenarioShape(NamedTuple):
    n_preparations: int
    n_settings: int
    n_outcomes: int


@dataclass(frozen=True, eq=False)
class Povm:
    """Effects stacked as an array of shape ``(k, n, n)``."""

    effects: np.ndarray
    policy: NumericPolicy = DEFAULT_POLICY

    def __post_init__(self):
        e = np.asarray(self.effects, dtype=complex)
        if e.ndim != 3 or e.shape[1] != e.shape[2] or e.shape[0] < 1:
            raise InvariantError(f"effects must have shape (k, n, n), got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise InvariantError("effects have non-finite entries")
        if e.shape[1] > self.policy.max_dim:
            raise InvariantError(f"effect dimension {e.shape[1]} exceeds {self.policy.max_dim}")
        asym = np.abs(e - np.conj(np.swapaxes(e, 1, 2))).max()
        if asym > self.policy.sym_tol * max(1.0, np.abs(e).max()):
            raise InvariantError(f"effects are not Hermitian (error {asym:.3e})")
        e = hermitian_part(e)
        lo = float(min(np.linalg.eigvalsh(m)[0] for m in e))
        if lo < -self.policy.psd_tol:
            raise InvariantError(f"effect with negative eigenvalue {lo:.3e}")
        resid = e.sum(axis=0) - np.eye(e.shape[1])
        err = float(np.linalg.norm(resid, 2))
        if err > self.policy.completeness_tol:
            raise InvariantError(f"effects do not sum to identity (error {err:.3e})")
        e.setflags(write=False)
        object.__setattr__(self, "effects", e)

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    def __len__(self) -> int:
        return self.n_outcomes

    def __getitem__(self, b: int) -> np.ndarray:
        return self.effects[b]

    @classmethod
    def repaired(cls, effects, policy: NumericPolicy = DEFAULT_POLICY) -> "Povm":
        """Clip tiny negative eigenvalues and renormalize to exact completeness.

        With ``S = sum_b M_b`` the effects become ``S^{-1/2} M_b S^{-1/2}``.
        """
        e = hermitian_part(np.asarray(effects, dtype=complex))
        w, v = np.linalg.eigh(e)
        e = np.einsum("kij,kj,klj->kil", v, np.clip(w, 0.0, None), v.conj())
        sw, sv = np.linalg.eigh(e.sum(axis=0))
        f = (sv * sw**-0.5) @ sv.conj().T
        return cls(f @ e @ f, policy)

    def to_list(self) -> list:
        return [{"re": m.real.tolist(), "im": m.imag.tolist()} for m in self.effects]


@dataclass(frozen=True, eq=False)
class PreparationFamily:
    """Shared state plus one local encoding on Alice's side per input ``x``.

    An encoding is either a unitary ``d_a x d_a`` array or a
    :class:`ChoiOperator`.  All prepared states are computed and checked
    on construction, including the no-signalling marginal condition.
    """

    shared_state: DensityOperator
    encodings: tuple
    policy: NumericPolicy = DEFAULT_POLICY

    def __post_init__(self):
        encs = []
        for k, enc in enumerate(self.encodings):
            if isinstance(enc, ChoiOperator):
                if enc.d_in != self.shared_state.d_a or enc.d_out != self.shared_state.d_a:
                    raise InvariantError(f"encoding {k} has wrong dimensions")
                encs.append(enc)
                continue
            u = np.asarray(enc, dtype=complex)
            if u.shape != (self.shared_state.d_a,) * 2:
                raise InvariantError(f"encoding {k} has shape {u.shape}, expected d_a x d_a")
            if not is_unitary(u):
                raise InvariantError(f"encoding {k} is not unitary")
            u = u.copy()
            u.setflags(write=False)
            encs.append(u)
        if not encs:
            raise InvariantError("a preparation family needs at least one encoding")
        object.__setattr__(self, "encodings", tuple(encs))
        marg = [rho.reduced("B") for rho in self.states]
        worst = max(trace_norm(m - marg[0]) for m in marg)
        if worst > self.policy.marginal_tol:
            raise InvariantError(f"Bob's marginal depends on x (trace distance {worst:.3e})")

    @property
    def n_preparations(self) -> int:
        return len(self.encodings)

    @property
    def dims(self) -> tuple[int, int]:
        return self.shared_state.dims

    @cached_property
    def states(self) -> tuple[DensityOperator, ...]:
        return tuple(_apply(enc, self.shared_state) for enc in self.encodings)

    def __len__(self) -> int:
        return self.n_preparations


def _apply(enc: Encoding, rho: DensityOperator) -> DensityOperator:
    if isinstance(enc, ChoiOperator):
        return apply_local_channel(enc, rho)
    return apply_local_unitary(enc, rho)


@dataclass(frozen=True, eq=False)
class Behavior:
    """Probabilities ``p[b, x, y]`` of outcome ``b`` given input ``x`` and setting ``y``."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.ndim != 3:
            raise InvariantError(f"behavior must be a 3-d array p[b, x, y], got {p.shape}")
        if p.min() < -1e-12 or p.max() > 1 + 1e-12:
            raise InvariantError("probabilities outside [0, 1]")
        if np.abs(p.sum(axis=0) - 1.0).max() > 1e-9:
            raise InvariantError("probabilities do not sum to one over outcomes")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @property
    def shape(self) -> ScenarioShape:
        k, n, m = self.probabilities.shape
        return ScenarioShape(n, m, k)

    def __call__(self, b: int, x: int, y: int = 0) -> float:
        return float(self.probabilities[b, x, y])


def weyl(d: int, k: int, x1: int, x2: int) -> np.ndarray:
    """Clock-and-shift operator ``sum_j exp(2 pi i j x2 / K) |j + x1 mod d><j|``."""
    if not (0 <= x1 < d and 0 <= x2 < k):
        raise ValueError(f"indices (x1={x1}, x2={x2}) out of range for d={d}, K={k}")
    j = np.arange(d)
    w = np.zeros((d, d), dtype=complex)
    w[(j + x1) % d, j] = np.exp(2j * np.pi * j * x2 / k)
    return w


def prepare(family: PreparationFamily, x: int) -> DensityOperator:
    if not 0 <= x < family.n_preparations:
        raise IndexError(f"preparation {x} out of range")
    return family.states[x]


def behavior(family: PreparationFamily, povms: Povm | Sequence[Povm]) -> Behavior:
    if isinstance(povms, Povm):
        povms = [povms]
    povms = list(povms)
    k = povms[0].n_outcomes
    dim = family.shared_state.dim
    for y, m in enumerate(povms):
        if m.dim != dim:
            raise InvariantError(f"POVM {y} acts on dimension {m.dim}, states on {dim}")
        if m.n_outcomes != k:
            raise InvariantError("all settings must have the same number of outcomes")
    rhos = np.array([r.matrix for r in family.states])
    effects = np.array([m.effects for m in povms])
    # tr(rho_x M_b^y) = sum_ij rho_x[i, j] M[j, i]
    p = np.einsum("xij,ybji->bxy", rhos, effects).real
    return Behavior(np.clip(p, 0.0, 1.0))


def p_suc(beh: Behavior) -> float:
    """Average probability of decoding ``b = x`` with a single setting."""
    n, m, k = beh.shape
    if m != 1 or k != n:
        raise InvariantError(f"p_suc needs one setting with N outcomes, got shape {beh.shape}")
    return float(np.trace(beh.probabilities[:, :, 0]) / n)


def pair_settings(n: int) -> list[tuple[int, int]]:
    """Settings ``(x, x')`` with ``x > x'`` in lexicographic order."""
    return [(x, xp) for x in range(n) for xp in range(x)]


def v_n(beh: Behavior) -> float:
    """``sum_{x > x'} |p(1|x,(x,x')) - p(1|x',(x,x'))|^2``."""
    n, m, k = beh.shape
    pairs = pair_settings(n)
    if k != 2 or m != len(pairs):
        raise InvariantError(f"V_N needs N(N-1)/2 dichotomic settings, got shape {beh.shape}")
    p1 = beh.probabilities[1]
    return float(sum((p1[x, y] - p1[xp, y]) ** 2 for y, (x, xp) in enumerate(pairs)))


def _tilde_states(d: int, s: int, k: int, d_b: int) -> np.ndarray:
    """Rows are ``(1/sqrt s) sum_{j<s} W|j> ⊗ |j>`` ordered by ``x = x1 * K + x2``."""
    out = []
    for x1 in range(d):
        for x2 in range(k):
            amp = np.zeros((d, d_b), dtype=complex)
            amp[:, :s] = weyl(d, k, x1, x2)[:, :s] / np.sqrt(s)
            out.append(amp.reshape(-1))
    return np.array(out)


def canonical_sdc_protocol(d: int, s: int, k: int,
                           policy: NumericPolicy = DEFAULT_POLICY) -> tuple[PreparationFamily, Povm]:
    """Encodings and measurement attaining ``p_suc = s/K`` with ``N = d K`` inputs.

    The shared state is ``sum_{j<s} |jj>/sqrt(s)`` on ``C^d ⊗ C^d``, Alice
    applies ``weyl(d, K, x1, x2)`` and Bob projects onto the encoded
    states with weight ``s/K``, padding the unused part of his space
    uniformly over outcomes.
    """
    if not 1 <= s <= d:
        raise InvariantError(f"need 1 <= s <= d, got s={s}, d={d}")
    if k < s:
        raise InvariantError(f"need K >= s, got K={k}, s={s}")
    n = d * k
    coeffs = np.zeros(d)
    coeffs[:s] = 1 / np.sqrt(s)
    amp = np.diag(coeffs).astype(complex)
    shared = PureState(amp.reshape(-1), d, d, policy).density()
    encodings = tuple(weyl(d, k, x1, x2) for x1 in range(d) for x2 in range(k))
    family = PreparationFamily(shared, encodings, policy)
    psi = _tilde_states(d, s, k, d)
    pad = np.diag(np.r_[np.zeros(s), np.ones(d - s)])
    rest = np.kron(np.eye(d), pad) / n
    effects = np.array([(s / k) * np.outer(v, v.conj()) + rest for v in psi])
    return family, Povm(effects, policy)


def bell_basis_povm(d: int, policy: NumericPolicy = DEFAULT_POLICY) -> Povm:
    """Projectors onto ``(W_x ⊗ I)|Phi+>`` for the ``d^2`` Weyl operators."""
    psi = _tilde_states(d, d, d, d)
    return Povm(np.array([np.outer(v, v.conj()) for v in psi]), policy)


def helstrom_povm(rho, sigma, policy: NumericPolicy = DEFAULT_POLICY) -> Povm:
    """Dichotomic POVM whose outcome 1 projects onto the non-negative part of ``rho - sigma``.

    Zero eigenvalues (up to 1e-10) go to outcome 1.  Then
    ``p(1|rho) - p(1|sigma)`` equals the trace distance.
    """
    a = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    b = np.asarray(getattr(sigma, "matrix", sigma), dtype=complex)
    if a.shape != b.shape:
        raise InvariantError(f"dimension mismatch: {a.shape} vs {b.shape}")
    w, v = np.linalg.eigh(hermitian_part(a - b))
    keep = v[:, w >= -1e-10]
    m1 = keep @ keep.conj().T
    return Povm(np.array([np.eye(len(a)) - m1, m1]), policy)


def helstrom_povms(family: PreparationFamily) -> list[Povm]:
    """One Helstrom measurement per setting ``(x, x')`` of :func:`pair_settings`."""
    st = family.states
    return [helstrom_povm(st[x], st[xp], family.policy)
            for x, xp in pair_settings(family.n_preparations)]


def vn_weyl_preparations(d: int, n: int, policy: NumericPolicy = DEFAULT_POLICY) -> PreparationFamily:
    """``n`` preparations of ``|Phi+_d>`` grouped over the ``d^2`` Weyl operators.

    Input ``x`` uses Weyl operator number ``x mod d^2``, so the first
    ``n mod d^2`` groups have ``floor(n/d^2) + 1`` members and the others
    ``floor(n/d^2)``.
    """
    if d < 2 or n < 2:
        raise InvariantError("need d >= 2 and N >= 2")
    ops = [weyl(d, d, x1, x2) for x1 in range(d) for x2 in range(d)]
    shared = max_entangled(d, policy).density()
    return PreparationFamily(shared, tuple(ops[x % (d * d)] for x in range(n)), policy)


def omega_purity(family: PreparationFamily) -> float:
    """``tr(Omega^2)`` for ``Omega`` the uniform mixture of the prepared states."""
    omega = sum(r.matrix for r in family.states) / family.n_preparations
    return float(np.real(np.vdot(omega, omega)))
