import json

import numpy as np
import pytest

from densecoding.channels import ChoiOperator
from densecoding.policy import InvariantError
from densecoding.protocol import PreparationFamily, behavior, canonical_sdc_protocol
from densecoding.records import (behavior_rows, content_hash, dumps, fmt, protocol_from_dict,
                                 protocol_to_dict, provenance, render_csv, rounded, state_from_dict)
from densecoding.states import isotropic, random_unitary


def test_fmt_and_rounding():
    assert fmt(1 / 3) == "0.333333333333"
    assert rounded({"a": [np.float64(2 / 3), np.int64(3)], "b": np.array([0.1 + 1e-15])}) == \
        {"a": [0.666666666667, 3], "b": [0.1]}
    assert rounded(float("nan")) is None
    assert rounded(-0.0) == 0.0


def test_dumps_is_canonical():
    a = dumps({"b": 1.0, "a": [1 / 3]})
    b = dumps({"a": [1 / 3 + 1e-16], "b": 1.0})
    assert a == b
    assert list(json.loads(a)) == ["a", "b"]


def test_content_hash():
    assert content_hash(b"abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    assert content_hash({"x": 1, "y": 2}) == content_hash({"y": 2, "x": 1})
    assert content_hash({"x": 1}) != content_hash({"x": 2})


def test_provenance_fields():
    meta = provenance(7, "abc")
    assert {"tool", "version", "seed", "numeric_policy", "input_hash"} <= set(meta)
    assert meta["seed"] == 7


def test_render_csv_header():
    text = render_csv(["x", "y"], [(1, 0.5)], {"seed": 3})
    assert text.splitlines() == ["# seed: 3", "x,y", "1,0.5"]


def test_protocol_round_trip():
    fam, povm = canonical_sdc_protocol(2, 2, 2)
    data = json.loads(json.dumps(protocol_to_dict(fam, povm)))
    fam2, povms = protocol_from_dict(data)
    assert np.array_equal(fam2.shared_state.matrix, fam.shared_state.matrix)
    assert len(povms) == 1 and np.array_equal(povms[0].effects, povm.effects)
    assert np.allclose(behavior(fam2, povms).probabilities, behavior(fam, povm).probabilities)


def test_protocol_round_trip_with_choi():
    rng = np.random.default_rng(0)
    fam = PreparationFamily(isotropic(2, 0.5), (ChoiOperator.from_unitary(random_unitary(2, rng)),
                                               ChoiOperator.depolarizing(2)))
    _, povm = canonical_sdc_protocol(2, 1, 1)
    data = json.loads(json.dumps(protocol_to_dict(fam, povm)))
    assert [e["type"] for e in data["encodings"]] == ["choi", "choi"]
    fam2, _ = protocol_from_dict(data)
    for a, b in zip(fam.states, fam2.states):
        assert np.array_equal(a.matrix, b.matrix)


def test_protocol_from_dict_errors():
    with pytest.raises(ValueError):
        protocol_from_dict({"shared_state": {}})
    fam, povm = canonical_sdc_protocol(2, 2, 2)
    data = protocol_to_dict(fam, povm)
    data["encodings"][0] = {"type": "teleport"}
    with pytest.raises(ValueError):
        protocol_from_dict(data)
    data = protocol_to_dict(fam, povm)
    data["encodings"][0]["re"] = [[1, 0], [0, 2]]
    with pytest.raises(InvariantError):
        protocol_from_dict(data)


def test_state_from_dict_accepts_wrapper():
    rho = isotropic(2, 0.3)
    assert np.array_equal(state_from_dict({"shared_state": rho.to_dict()}).matrix, rho.matrix)
    with pytest.raises(ValueError):
        state_from_dict({"re": [[1]]})


def test_behavior_rows_order():
    fam, povm = canonical_sdc_protocol(2, 2, 2)
    rows = behavior_rows(behavior(fam, povm))
    assert len(rows) == 16
    assert [r[:3] for r in rows[:3]] == [(0, 0, 0), (0, 1, 0), (0, 2, 0)]
