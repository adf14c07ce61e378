import json

import numpy as np
import pytest

from densecoding.policy import InvariantError
from densecoding.protocol import PreparationFamily, canonical_sdc_protocol, weyl
from densecoding.sdp import optimize_povm
from densecoding.states import (DensityOperator, PureState, fidelity_phi_plus, isotropic,
                                max_entangled, random_density, random_unitary, schmidt_state)
from densecoding.witness import (BRUTEFORCE_MAX_D, BRUTEFORCE_MAX_N, ClassicalStrategy,
                                 build_zeta_protocol, classical_optimum_bruteforce,
                                 comparison_constants, psuc_bound, pure_state_psuc_lower,
                                 schmidt_number_lower_bound, selftest_check, strategy_psuc, vn_bound)


def test_psuc_bound_examples():
    assert psuc_bound(2, 1, 4) == 0.5
    assert psuc_bound(2, 2, 4) == 1
    assert abs(psuc_bound(3, 2, 9) - 2 / 3) < 1e-15
    with pytest.raises(InvariantError):
        psuc_bound(2, 3, 4)


def test_pure_state_lower_examples():
    assert abs(pure_state_psuc_lower([1 / np.sqrt(2)] * 2, 2) - 1) < 1e-12
    assert pure_state_psuc_lower([1.0], 2) == 0.5
    assert abs(pure_state_psuc_lower([np.sqrt(0.9), np.sqrt(0.1)], 2) - 0.8) < 1e-12
    with pytest.raises(InvariantError):
        pure_state_psuc_lower([0.5, 0.5], 2)
    with pytest.raises(InvariantError):
        pure_state_psuc_lower([np.sqrt(0.1), np.sqrt(0.9)], 2)


def test_pure_state_lower_never_exceeds_schmidt_bound():
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = int(rng.integers(2, 6))
        r = int(rng.integers(1, d + 1))
        eta = np.sort(np.sqrt(rng.dirichlet(np.ones(r))))[::-1]
        assert pure_state_psuc_lower(eta, d) <= psuc_bound(d, r, d * d) + 1e-12


def test_pure_state_lower_is_attained_by_weyl_protocol():
    # the Weyl encodings with the Bell-basis measurement reach exactly (1 + Gamma) / d
    for eta in ([np.sqrt(0.9), np.sqrt(0.1)], [0.8, 0.6]):
        psi = schmidt_state(eta, 2, 2)
        _, _, p = build_zeta_protocol(psi.density())
        assert abs(p - pure_state_psuc_lower(eta, 2)) < 1e-12


def test_vn_bound_examples():
    assert vn_bound(2, 1, 4) == 4
    assert vn_bound(2, 2, 4) == 6
    assert vn_bound(2, 2, 3) == 3


def test_bruteforce_examples():
    assert classical_optimum_bruteforce(4, 2) == 0.5
    assert classical_optimum_bruteforce(2, 2) == 1
    assert abs(classical_optimum_bruteforce(9, 3) - 1 / 3) < 1e-15
    with pytest.raises(InvariantError):
        classical_optimum_bruteforce(BRUTEFORCE_MAX_N + 1, 2)
    with pytest.raises(InvariantError):
        classical_optimum_bruteforce(4, BRUTEFORCE_MAX_D + 1)


def test_bruteforce_equals_classical_bound():
    for d in (1, 2, 3):
        for n in range(1, 10):
            if d == 3 and n == 9:
                continue  # covered in the examples test
            assert classical_optimum_bruteforce(n, d) == psuc_bound(d, 1, n)


def test_random_mixtures_never_beat_deterministic():
    # shared randomness plus stochastic maps is a convex mix of deterministic strategies
    rng = np.random.default_rng(1)
    for n, d in ((3, 2), (4, 2), (5, 3)):
        best = classical_optimum_bruteforce(n, d)
        for _ in range(500):
            enc = rng.dirichlet(np.ones(d), size=n)       # p(a|x)
            dec = rng.dirichlet(np.ones(n), size=d)       # p(b|a)
            value = float(np.einsum("xa,ax->", enc, dec)) / n
            assert value <= best + 1e-12


def test_strategy_psuc():
    enc = (0, 1, 0, 1)
    dec = (0, 1)
    assert strategy_psuc(ClassicalStrategy(enc, dec)) == 0.5


def test_schmidt_number_lower_bound_examples():
    assert schmidt_number_lower_bound(1.0, 2, 4) == 2
    assert schmidt_number_lower_bound(0.5, 2, 4) == 1
    assert schmidt_number_lower_bound(0.7, 2, 4) == 2
    assert schmidt_number_lower_bound(0.0, 3, 9) == 1
    assert schmidt_number_lower_bound(0.5 + 1e-13, 2, 4) == 1
    assert schmidt_number_lower_bound(0.34, 3, 9) == 2
    with pytest.raises(InvariantError):
        schmidt_number_lower_bound(1.5, 2, 4)


def test_schmidt_number_inverts_psuc_bound():
    for d in (2, 3, 4):
        n = d * d
        for p in np.linspace(0, 1, 41):
            s = schmidt_number_lower_bound(p, d, n)
            assert psuc_bound(d, s, n) >= p - 1e-12
            if s > 1:
                assert psuc_bound(d, s - 1, n) < p - 1e-12


def test_build_zeta_examples():
    _, _, p = build_zeta_protocol(max_entangled(2).density())
    assert abs(p - 1) < 1e-12
    _, _, p = build_zeta_protocol(isotropic(2, 1 / 3))
    assert abs(p - 0.5) < 1e-12
    _, _, p = build_zeta_protocol(isotropic(3, 0.5))
    assert abs(p - (0.5 + 0.5 / 9)) < 1e-12
    with pytest.raises(InvariantError):
        build_zeta_protocol(DensityOperator(np.eye(6) / 6, 2, 3))


def test_build_zeta_matches_fidelity_random():
    rng = np.random.default_rng(2)
    for _ in range(50):
        d = int(rng.integers(2, 4))
        rho = random_density(d, d, rng)
        fam, povm, p = build_zeta_protocol(rho)
        assert fam.n_preparations == d * d
        assert abs(p - fidelity_phi_plus(rho)) <= 1e-9


def test_selftest_examples():
    fam, povm = canonical_sdc_protocol(2, 2, 2)
    verdict = selftest_check(fam, povm)
    assert verdict.maximally_entangled_selftest and verdict.entangled
    assert verdict.schmidt_lower_bound == 2 and verdict.margin < 1e-12

    fam, povm, p = build_zeta_protocol(isotropic(2, 0.9))
    assert abs(p - 0.925) < 1e-12
    verdict = selftest_check(fam, povm)
    assert not verdict.maximally_entangled_selftest and verdict.entangled

    psi = PureState(np.array([np.sqrt(0.9), 0, 0, np.sqrt(0.1)]), 2, 2)
    fam = PreparationFamily(psi.density(), tuple(weyl(2, 2, a, b) for a in range(2) for b in range(2)))
    povm, _ = optimize_povm(fam.states)
    assert not selftest_check(fam, povm).maximally_entangled_selftest


def test_selftest_survives_local_unitaries():
    rng = np.random.default_rng(3)
    fam, povm = canonical_sdc_protocol(3, 3, 3)
    u = np.kron(random_unitary(3, rng), random_unitary(3, rng))
    shared = fam.shared_state.conjugated(u)
    rotated = PreparationFamily(shared, fam.encodings)
    povm, _ = optimize_povm(rotated.states)
    assert selftest_check(rotated, povm).maximally_entangled_selftest


def test_selftest_rejects_perturbed_spectra():
    for eps in (1e-3, 1e-2, 0.1):
        eta = np.sqrt(np.array([0.5 + eps, 0.5 - eps]))
        fam = PreparationFamily(schmidt_state(eta, 2, 2).density(),
                                tuple(weyl(2, 2, a, b) for a in range(2) for b in range(2)))
        povm, _ = optimize_povm(fam.states)
        assert not selftest_check(fam, povm).maximally_entangled_selftest


def test_selftest_shape_errors():
    fam, povm = canonical_sdc_protocol(2, 2, 3)
    with pytest.raises(InvariantError):
        selftest_check(fam, povm)


def test_verdict_serializes():
    fam, povm = canonical_sdc_protocol(2, 2, 2)
    data = json.loads(json.dumps(selftest_check(fam, povm).to_dict()))
    assert set(data) == {"schmidt_lower_bound", "entangled", "maximally_entangled_selftest", "margin"}


def test_comparison_constants_examples():
    c = comparison_constants(2)
    assert abs(c["sdc_isotropic"] - 1 / 3) < 1e-15
    assert abs(c["steering_isotropic"] - 0.5) < 1e-15
    assert abs(c["steering_werner"] - 2 / 3) < 1e-15
    assert c["werner_sdc_observed"] == 0.5
    assert abs(comparison_constants(3)["steering_isotropic"] - 5 / 12) < 1e-15


def test_comparison_constants_gap():
    for d in range(2, 8):
        c = comparison_constants(d)
        assert c["sdc_isotropic"] < c["steering_isotropic"]
