import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from densecoding import seesaw
from densecoding.cli import main
from densecoding.policy import SolverError
from densecoding.protocol import PreparationFamily, canonical_sdc_protocol, helstrom_povms, vn_weyl_preparations
from densecoding.records import protocol_to_dict
from densecoding.seesaw import random_povm
from densecoding.states import PureState, random_unitary


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _csv_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_simulate_canonical(tmp_path):
    fam, povm = canonical_sdc_protocol(2, 2, 2)
    proto = _write(tmp_path / "p.json", protocol_to_dict(fam, povm))
    assert main(["simulate", proto, "--output", str(tmp_path / "out")]) == 0
    summary = json.loads((tmp_path / "out_summary.json").read_text())
    assert abs(summary["p_suc"] - 1) < 1e-12 and summary["bound"] == 1
    rows = _csv_rows(tmp_path / "out_behavior.csv")
    assert list(rows[0]) == ["b", "x", "y", "p"] and len(rows) == 16
    head = (tmp_path / "out_behavior.csv").read_text().splitlines()
    assert any(l.startswith("# seed:") for l in head) and any(l.startswith("# input_hash:") for l in head)


def test_simulate_vn(tmp_path):
    fam = vn_weyl_preparations(2, 4)
    proto = _write(tmp_path / "p.json", protocol_to_dict(fam, helstrom_povms(fam)))
    assert main(["simulate", proto, "--output", str(tmp_path / "out")]) == 0
    summary = json.loads((tmp_path / "out_summary.json").read_text())
    assert abs(summary["v_n"] - 6) < 1e-9


def test_simulate_product_state(tmp_path):
    rng = np.random.default_rng(0)
    prod = PureState(np.kron(random_unitary(2, rng)[:, 0], random_unitary(2, rng)[:, 0]), 2, 2)
    fam = PreparationFamily(prod.density(), tuple(random_unitary(2, rng) for _ in range(4)))
    proto = _write(tmp_path / "p.json", protocol_to_dict(fam, random_povm(4, 4, rng)))
    assert main(["simulate", proto, "--output", str(tmp_path / "out")]) == 0
    summary = json.loads((tmp_path / "out_summary.json").read_text())
    assert summary["p_suc"] <= 0.5 + 1e-9
    assert summary["schmidt_number_used"] == 1 and summary["bound"] == 0.5


def test_simulate_exit_codes(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    assert main(["simulate", str(bad_json)]) == 2
    assert main(["simulate", str(tmp_path / "missing.json")]) == 2
    assert main(["simulate", _write(tmp_path / "empty.json", {"povms": []})]) == 2
    fam, povm = canonical_sdc_protocol(2, 2, 2)
    data = protocol_to_dict(fam, povm)
    data["povms"][0][0]["re"][0][0] += 0.5  # breaks completeness
    assert main(["simulate", _write(tmp_path / "broken.json", data)]) == 3


@pytest.mark.parametrize("family,param,expected", [("werner", 1.0, 1.0), ("isotropic", 0.2, 0.5),
                                                   ("isotropic", 1.0, 1.0)])
def test_seesaw_examples(tmp_path, family, param, expected):
    out = str(tmp_path / "run")
    assert main(["seesaw", "--family", family, "--d", "2", "--param", str(param),
                 "--restarts", "2", "--output", out]) == 0
    result = json.loads((tmp_path / "run_result.json").read_text())
    assert abs(result["best_value"] - expected) < 1e-5
    assert result["meta"]["seed"] == 0
    assert (tmp_path / "run_trace.csv").exists()


def test_seesaw_protocol_resimulates(tmp_path):
    out = str(tmp_path / "run")
    assert main(["seesaw", "--family", "isotropic", "--d", "2", "--chi", "0.6", "--restarts", "2",
                 "--output", out]) == 0
    best = json.loads((tmp_path / "run_result.json").read_text())["best_value"]
    assert main(["simulate", out + "_protocol.json", "--output", str(tmp_path / "sim")]) == 0
    again = json.loads((tmp_path / "sim_summary.json").read_text())["p_suc"]
    assert abs(again - best) <= 1e-8


def test_seesaw_outputs_byte_identical(tmp_path):
    args = ["seesaw", "--family", "werner", "--d", "2", "--alpha", "0.7", "--restarts", "2"]
    assert main(args + ["--output", str(tmp_path / "a")]) == 0
    assert main(args + ["--output", str(tmp_path / "b"), "--workers", "2"]) == 0
    for suffix in ("_result.json", "_protocol.json", "_trace.csv"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()


def test_seesaw_state_file_and_verbose_log(tmp_path):
    fam, _ = canonical_sdc_protocol(2, 2, 2)
    state = _write(tmp_path / "s.json", fam.shared_state.to_dict())
    out = str(tmp_path / "run")
    assert main(["seesaw", "--state", state, "--restarts", "1", "--verbose", "--output", out]) == 0
    assert (tmp_path / "run_sdp_log.csv").exists()


def test_seesaw_input_errors(tmp_path):
    assert main(["seesaw", "--family", "isotropic", "--d", "2", "--chi", "1.5"]) == 2
    assert main(["seesaw", "--family", "isotropic", "--d", "2"]) == 2
    assert main(["seesaw", "--family", "isotropic", "--d", "2", "--chi", "0.5", "--n", "1"]) == 2
    assert main(["seesaw", "--family", "isotropic", "--d", "2", "--chi", "0.5",
                 "--policy", "nonsense=1"]) == 2


def test_seesaw_solver_failure_exit(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("singular Newton system")

    monkeypatch.setattr(seesaw, "optimize_preparations", broken)
    assert main(["seesaw", "--family", "isotropic", "--d", "2", "--chi", "0.5", "--restarts", "1",
                 "--output", str(tmp_path / "x")]) == 4
    assert main(["sweep", "--family", "isotropic", "--d", "2", "--start", "0.4", "--stop", "0.5",
                 "--step", "0.1", "--restarts", "1", "--output", str(tmp_path / "y")]) == 4


def test_sweep_columns_and_verdicts(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--family", "isotropic", "--d", "2", "--start", "0.2", "--stop", "0.5",
                 "--step", "0.1", "--restarts", "1", "--output", str(out)]) == 0
    rows = _csv_rows(tmp_path / "sweep.csv")
    assert list(rows[0]) == ["param", "p_suc_lower", "rescaled_p_suc", "classical_bound",
                             "schmidt_lower_bound", "entangled", "rounds", "status"]
    assert [float(r["param"]) for r in rows] == [0.2, 0.3, 0.4, 0.5]
    assert [r["entangled"] for r in rows] == ["False", "False", "True", "True"]
    for r in rows:
        assert abs(float(r["rescaled_p_suc"]) - 2 * float(r["p_suc_lower"])) < 1e-9
    text = (tmp_path / "sweep.csv").read_text()
    assert "# comparison_constants:" in text


def test_witness_and_vn_commands(tmp_path):
    assert main(["witness", "--d", "2", "--p-observed", "0.7", "--output", str(tmp_path / "w")]) == 0
    rec = json.loads((tmp_path / "w.json").read_text())
    assert rec["observed"]["schmidt_lower_bound"] == 2 and rec["psuc_bound"] == 1
    assert rec["comparison_constants"]["steering_werner"] == 0.666666666667
    assert main(["vn", "--d", "2", "--n", "8", "--output", str(tmp_path / "v")]) == 0
    rec = json.loads((tmp_path / "v.json").read_text())
    assert abs(rec["v_n"] - 24) < 1e-8 and abs(rec["omega_purity"] - 0.25) < 1e-12


def test_witness_selftest_protocol(tmp_path):
    fam, povm = canonical_sdc_protocol(2, 2, 2)
    proto = _write(tmp_path / "p.json", protocol_to_dict(fam, povm))
    assert main(["witness", "--d", "2", "--protocol", proto, "--output", str(tmp_path / "w")]) == 0
    rec = json.loads((tmp_path / "w.json").read_text())
    text = json.dumps(rec)
    assert '"maximally_entangled_selftest": true' in text
    assert "protocol" in rec["meta"]["input_hashes"]


def test_config_file(tmp_path):
    cfg = _write(tmp_path / "cfg.json", {"d": 2, "n": 3})
    assert main(["vn", "--config", cfg, "--output", str(tmp_path / "v")]) == 0
    assert json.loads((tmp_path / "v.json").read_text())["n"] == 3
    bad = _write(tmp_path / "bad.json", {"bogus": 1})
    assert main(["vn", "--config", bad]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "densecoding", "vn", "--d", "2", "--n", "3"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["v_n"] == 3.0
