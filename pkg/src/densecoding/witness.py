"""Bounds on the success probability, certification verdicts and reference constants."""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from .linalg import herm_eig
from .policy import InvariantError
from .protocol import (PreparationFamily, Povm, behavior, bell_basis_povm, p_suc, weyl)
from .states import DensityOperator, twirl_to_isotropic

__all__ = [
    "ClassicalStrategy",
    "CertificationVerdict",
    "psuc_bound",
    "pure_state_psuc_lower",
    "vn_bound",
    "classical_optimum_bruteforce",
    "strategy_psuc",
    "schmidt_number_lower_bound",
    "build_zeta_protocol",
    "selftest_check",
    "comparison_constants",
    "BRUTEFORCE_MAX_N",
    "BRUTEFORCE_MAX_D",
]

BRUTEFORCE_MAX_N = 9
BRUTEFORCE_MAX_D = 3


def _check_sd(d_a: int, s: int, n: int) -> None:
    if d_a < 1 or n < 1:
        raise InvariantError(f"need d_a >= 1 and n >= 1, got d_a={d_a}, n={n}")
    if not 1 <= s <= d_a:
        raise InvariantError(f"Schmidt number s={s} must lie in [1, d_a={d_a}]")


def psuc_bound(d_a: int, s: int, n: int) -> float:
    """Largest ``p_suc`` reachable with Schmidt number ``s``: ``min(d_a s / n, 1)``."""
    _check_sd(d_a, s, n)
    return min(d_a * s / n, 1.0)


def pure_state_psuc_lower(coefficients, d_a: int, tol: float = 1e-9) -> float:
    """``(1 + sum_{j != k} eta_j eta_k) / d_a`` for a Schmidt spectrum ``eta``.

    Attained by Weyl encodings with a measurement in the encoded basis.
    """
    eta = np.asarray(coefficients, dtype=float).reshape(-1)
    if eta.size == 0 or eta.size > d_a:
        raise InvariantError(f"need between 1 and d_a={d_a} Schmidt coefficients")
    if np.any(eta < -tol) or np.any(np.diff(eta) > tol):
        raise InvariantError("Schmidt coefficients must be non-negative and descending")
    if abs(float(eta @ eta) - 1.0) > tol:
        raise InvariantError(f"squared Schmidt coefficients sum to {eta @ eta:.12g}, not 1")
    gamma = float(eta.sum() ** 2 - eta @ eta)
    return (1.0 + gamma) / d_a


def vn_bound(d_a: int, s: int, n: int) -> float:
    """``(n^2/2)(1 - 1/min(d_a s, n))``."""
    _check_sd(d_a, s, n)
    m = min(d_a * s, n)
    return n * n * (m - 1) / (2 * m)


class ClassicalStrategy(NamedTuple):
    """Deterministic encoder ``x -> a`` and decoder ``a -> b`` (single setting)."""

    encoder: tuple
    decoder: tuple


def strategy_psuc(strategy: ClassicalStrategy) -> float:
    enc, dec = strategy
    return sum(dec[a] == x for x, a in enumerate(enc)) / len(enc)


def classical_optimum_bruteforce(n: int, d_a: int, chunk: int = 4096) -> float:
    """Exact best ``p_suc`` of an ``n``-input classical protocol with a ``d_a``-level message.

    ``p_suc`` is linear in the strategy, so shared randomness (a convex
    mixture of deterministic strategies) never beats the best
    deterministic pair; only those are enumerated.
    """
    if n < 1 or d_a < 1:
        raise InvariantError("need n >= 1 and d_a >= 1")
    if n > BRUTEFORCE_MAX_N or d_a > BRUTEFORCE_MAX_D:
        raise InvariantError(f"enumeration capped at n <= {BRUTEFORCE_MAX_N}, d_a <= {BRUTEFORCE_MAX_D}")
    decoders = np.array(list(itertools.product(range(n), repeat=d_a)), dtype=np.int8)
    target = np.arange(n)
    best = 0
    encoders = itertools.product(range(d_a), repeat=n)
    while True:
        block = np.array(list(itertools.islice(encoders, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        # decoded[k, e, x] = decoder_k(encoder_e(x))
        decoded = decoders[:, block]
        hits = (decoded == target).sum(axis=2)
        best = max(best, int(hits.max()))
    return best / n


def schmidt_number_lower_bound(p_suc_observed: float, d_a: int, n: int) -> int:
    """Smallest ``s`` with ``min(d_a s / n, 1) >= p_suc_observed - 1e-12``."""
    p = float(p_suc_observed)
    if not -1e-12 <= p <= 1 + 1e-12:
        raise InvariantError(f"observed success probability {p} outside [0, 1]")
    for s in range(1, d_a + 1):
        if min(d_a * s / n, 1.0) >= p - 1e-12:
            return s
    return d_a


class CertificationVerdict(NamedTuple):
    schmidt_lower_bound: int
    entangled: bool
    maximally_entangled_selftest: bool
    margin: float

    def to_dict(self) -> dict:
        return {
            "schmidt_lower_bound": int(self.schmidt_lower_bound),
            "entangled": bool(self.entangled),
            "maximally_entangled_selftest": bool(self.maximally_entangled_selftest),
            "margin": float(self.margin),
        }


def build_zeta_protocol(rho: DensityOperator) -> tuple[PreparationFamily, Povm, float]:
    """Twirl ``rho`` to the isotropic family and run Weyl encodings with a Bell-basis readout.

    The returned success probability equals the ``Phi+`` fidelity of ``rho``.
    """
    if rho.d_a != rho.d_b:
        raise InvariantError(f"need d_a == d_b, got {rho.dims}")
    d = rho.d_a
    twirled = twirl_to_isotropic(rho)
    encodings = tuple(weyl(d, d, x1, x2) for x1 in range(d) for x2 in range(d))
    family = PreparationFamily(twirled, encodings, rho.policy)
    povm = bell_basis_povm(d, rho.policy)
    return family, povm, p_suc(behavior(family, povm))


def selftest_check(family: PreparationFamily, povm: Povm, tol: float = 1e-6,
                   spectrum_tol: float = 1e-4) -> CertificationVerdict:
    """Certify the Schmidt number and test for perfect superdense coding.

    The self-test passes only if ``p_suc >= 1 - tol``, the prepared states
    are pairwise orthogonal (``tr(rho_x rho_x') <= tol``) and Alice's
    marginal is maximally mixed to within ``spectrum_tol``.
    """
    d_a, _ = family.dims
    n = family.n_preparations
    if n != d_a * d_a:
        raise InvariantError(f"need N = d_a^2 = {d_a * d_a} preparations, got {n}")
    if povm.n_outcomes != n or povm.dim != family.shared_state.dim:
        raise InvariantError("measurement does not match the preparations")
    p = p_suc(behavior(family, povm))
    s = schmidt_number_lower_bound(min(max(p, 0.0), 1.0), d_a, n)
    margin = min(abs(p - psuc_bound(d_a, k, n)) for k in range(1, d_a + 1))
    ok = p >= 1 - tol
    if ok:
        rhos = np.array([r.matrix for r in family.states])
        gram = np.einsum("xij,yji->xy", rhos, rhos).real
        ok = bool(np.abs(gram - np.diag(np.diag(gram))).max() <= tol)
    if ok:
        spectrum = herm_eig(family.shared_state.reduced("A")).eigenvalues
        ok = bool(np.abs(spectrum - 1.0 / d_a).max() <= spectrum_tol)
    return CertificationVerdict(s, s >= 2, ok, float(margin))


def comparison_constants(d: int) -> dict:
    """Reference critical parameters for the isotropic and Werner families.

    ``sdc_isotropic`` is where superdense coding stops beating the
    classical bound; the steering values mark where steering-based
    certification stops; ``werner_sdc_observed`` is the Werner parameter
    above which the see-saw is expected to beat the classical bound.
    """
    if d < 2:
        raise InvariantError("need d >= 2")
    harmonic = sum(1.0 / k for k in range(1, d + 1))
    return {
        "sdc_isotropic": 1.0 / (d + 1),
        "steering_isotropic": (harmonic - 1.0) / (d - 1),
        "steering_werner": d / (d + 1),
        "werner_sdc_observed": (d - 1) / d,
    }

