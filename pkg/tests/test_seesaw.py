import csv

import numpy as np
import pytest

from densecoding import seesaw
from densecoding.policy import InvariantError, SolverError
from densecoding.seesaw import (SeesawConfig, default_restarts, initial_povm, random_povm, resimulate,
                                seesaw_psuc, write_trace_csv)
from densecoding.states import (DensityOperator, isotropic, max_entangled, random_density,
                                random_pure_state, werner)
from densecoding.witness import psuc_bound


def _assert_monotone(result):
    for t in result.traces:
        assert all(b >= a for a, b in zip(t.values, t.values[1:]))


def test_config_validation():
    with pytest.raises(InvariantError):
        SeesawConfig(1)
    with pytest.raises(InvariantError):
        SeesawConfig(4, tol=0)
    with pytest.raises(InvariantError):
        SeesawConfig(4, restarts=0)
    assert default_restarts(3) == 10 and default_restarts(4) == 20


def test_random_povm_is_complete_and_full_rank():
    povm = random_povm(4, 5, np.random.default_rng(0))
    assert np.abs(povm.effects.sum(axis=0) - np.eye(4)).max() < 1e-12
    assert min(np.linalg.eigvalsh(e)[0] for e in povm.effects) > 0


def test_initial_povm_streams():
    shared = isotropic(2, 0.5)
    cfg = SeesawConfig(4, seed=3)
    a, b = initial_povm(shared, cfg, 1), initial_povm(shared, cfg, 1)
    assert np.array_equal(a.effects, b.effects)
    assert not np.array_equal(a.effects, initial_povm(shared, cfg, 2).effects)
    random_first = SeesawConfig(4, seed=3, structured_start=False)
    bell = initial_povm(shared, cfg, 0).effects
    assert np.linalg.matrix_rank(bell[0]) == 1
    assert np.linalg.matrix_rank(initial_povm(shared, random_first, 0).effects[0]) == 4


def test_maximally_entangled_reaches_one():
    res = seesaw_psuc(max_entangled(2).density(), SeesawConfig(4, restarts=3, seed=0))
    assert abs(res.best_value - 1) < 1e-6
    _assert_monotone(res)


def test_maximally_entangled_random_starts_only():
    res = seesaw_psuc(max_entangled(2).density(),
                      SeesawConfig(4, restarts=3, seed=0, structured_start=False))
    assert abs(res.best_value - 1) < 1e-6


def test_isotropic_below_threshold_gives_classical_value():
    res = seesaw_psuc(isotropic(2, 0.2), SeesawConfig(4, restarts=3, seed=1))
    assert abs(res.best_value - 0.5) < 1e-5
    _assert_monotone(res)


def test_singlet_reaches_one():
    res = seesaw_psuc(werner(2, 1), SeesawConfig(4, restarts=3, seed=2))
    assert abs(res.best_value - 1) < 1e-6


def test_isotropic_above_threshold_matches_zeta():
    for chi in (0.5, 0.8):
        res = seesaw_psuc(isotropic(2, chi), SeesawConfig(4, restarts=2, seed=0))
        assert res.best_value >= chi + (1 - chi) / 4 - 1e-6


def test_bound_and_resimulation_random_states():
    rng = np.random.default_rng(4)
    for k in range(4):
        d = 2
        n = int(rng.integers(3, 6))
        rho = random_density(d, d, rng) if k % 2 else random_pure_state(d, d, rng, rank=1).density()
        s = 1 if k % 2 == 0 else d
        res = seesaw_psuc(rho, SeesawConfig(n, restarts=2, seed=k, max_rounds=30))
        assert 0 <= res.best_value <= psuc_bound(d, s, n) + 1e-6
        chois, povm = res.best_protocol
        assert abs(resimulate(rho, chois, povm) - res.best_value) <= 1e-8
        assert res.best_value >= max(t.values[-1] for t in res.traces) - 1e-8
        _assert_monotone(res)


def test_determinism():
    rho = random_density(2, 2, np.random.default_rng(5))
    cfg = SeesawConfig(4, restarts=2, seed=11, max_rounds=20)
    a, b = seesaw_psuc(rho, cfg), seesaw_psuc(rho, cfg)
    assert [t.values for t in a.traces] == [t.values for t in b.traces]
    assert a.best_value == b.best_value and a.best_restart == b.best_restart


def test_parallel_matches_serial():
    rho = isotropic(2, 0.4)
    serial = seesaw_psuc(rho, SeesawConfig(4, restarts=2, seed=7, max_rounds=10))
    parallel = seesaw_psuc(rho, SeesawConfig(4, restarts=2, seed=7, max_rounds=10, workers=2))
    assert [t.values for t in serial.traces] == [t.values for t in parallel.traces]
    assert serial.best_value == parallel.best_value


def test_restart_failure_is_isolated(monkeypatch):
    real = seesaw.optimize_preparations
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise SolverError("singular Newton system")
        return real(*args, **kwargs)

    monkeypatch.setattr(seesaw, "optimize_preparations", flaky)
    res = seesaw_psuc(max_entangled(2).density(), SeesawConfig(4, restarts=2, seed=0))
    assert res.n_failed == 1
    assert res.traces[0].error and res.traces[1].error is None
    assert abs(res.best_value - 1) < 1e-6
    assert res.best_restart == 1


def test_all_restarts_failing_raises(monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("singular Newton system")

    monkeypatch.setattr(seesaw, "optimize_preparations", broken)
    with pytest.raises(SolverError):
        seesaw_psuc(isotropic(2, 0.5), SeesawConfig(4, restarts=2))


def test_maximally_mixed_state_gives_classical_value():
    # replacement channels still carry log d bits classically
    res = seesaw_psuc(DensityOperator(np.eye(4) / 4, 2, 2), SeesawConfig(4, restarts=2, seed=0))
    assert abs(res.best_value - 0.5) < 1e-6


def test_ties_go_to_lowest_restart(monkeypatch):
    real = seesaw._run_restart

    def equal_values(shared, config, restart):
        trace, (_, chois, povm) = real(shared, config, 0)
        trace.restart = restart
        return trace, (0.75, chois, povm)

    monkeypatch.setattr(seesaw, "_run_restart", equal_values)
    res = seesaw_psuc(max_entangled(2).density(), SeesawConfig(4, restarts=3, seed=0, max_rounds=2))
    assert res.best_restart == 0


def test_trace_csv(tmp_path):
    res = seesaw_psuc(isotropic(2, 0.6), SeesawConfig(4, restarts=2, seed=0, max_rounds=5))
    path = tmp_path / "trace.csv"
    write_trace_csv(res, path, ["seed: 0"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed: 0"
    rows = list(csv.DictReader(lines[1:]))
    assert set(rows[0]) == {"restart", "round", "value"}
    assert len(rows) == sum(len(t.values) for t in res.traces)
    assert rows[0]["round"] == "1"
