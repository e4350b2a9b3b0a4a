import json

import numpy as np
import pytest

from qtomo.cli import main
from qtomo.combs import QuantumComb, Tester, save_json
from qtomo.devices import random_channel
from qtomo.frames import frame_to_dict, pauli_povm


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_optimal_tester_unital(capsys, tmp_path):
    code, out, _ = run(capsys, "optimal-tester", "--kind", "unital", "--d", "2", "--json",
                       "--out", str(tmp_path / "r.csv"))
    row = json.loads(out)
    assert code == 0
    assert row["eta_bound"] == 28 and row["beta"] == 0 and row["purity"] == pytest.approx(0.5)
    assert (tmp_path / "r.csv").read_text().startswith("kind,d,A_opt")
    code, out, _ = run(capsys, "optimal-tester", "--kind", "unital", "--d", "2")
    assert "eta_bound" in out and "28" in out


def test_state_tomo_deterministic(capsys, tmp_path):
    args = ["state-tomo", "--d", "2", "--povm", "pauli6", "--shots", "10000", "--trials", "100", "--seed", "7"]
    assert run(capsys, *args, "--out", str(tmp_path / "a.json"))[0] == 0
    assert run(capsys, *args, "--out", str(tmp_path / "b.json"))[0] == 0
    assert (tmp_path / "a.trials.csv").read_bytes() == (tmp_path / "b.trials.csv").read_bytes()
    a, b = (json.loads((tmp_path / f).read_text()) for f in ("a.json", "b.json"))
    assert a["summary"] == b["summary"]
    a["config"].pop("out"), b["config"].pop("out")
    assert a["config"] == b["config"]


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"shots": 100, "trials": 3, "seed": 1}))
    code, out, _ = run(capsys, "state-tomo", "--config", str(cfg), "--trials", "4", "--json")
    assert code == 0 and json.loads(out)["trials"] == 4
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(capsys, "state-tomo", "--config", str(cfg))[0] == 2


def test_exact_mode_flag(capsys):
    code, out, _ = run(capsys, "state-tomo", "--shots", "0", "--trials", "2", "--json")
    rec = json.loads(out)
    assert code == 0 and max(rec["mse"]) < 1e-20


def test_other_experiments(capsys):
    assert run(capsys, "process-tomo", "--kind", "unital", "--shots", "50", "--trials", "2")[0] == 0
    assert run(capsys, "povm-tomo", "--shots", "100", "--trials", "2")[0] == 0
    code, out, _ = run(capsys, "duals", "--prior", "skewed", "--shots", "100", "--trials", "5", "--json")
    rows = json.loads(out)
    assert code == 0 and [r["dual"] for r in rows] == ["canonical", "optimal"]


def test_usage_errors(capsys):
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "state-tomo", "--d", "3", "--povm", "pauli6")[0] == 2
    assert run(capsys, "optimal-tester", "--kind", "qops", "--d", "1")[0] == 2
    assert run(capsys, "state-tomo", "--unknown-flag")[0] == 2
    assert run(capsys, "validate", "--comb", "/nonexistent.json")[0] == 2


def test_validate(capsys, tmp_path, rng):
    good = QuantumComb.from_choi(random_channel(2, rng=rng))
    save_json(tmp_path / "good.json", good)
    code, out, _ = run(capsys, "validate", "--comb", str(tmp_path / "good.json"), "--json")
    assert code == 0 and json.loads(out)["passed"]
    R = np.kron(np.diag([1.0, 0.0]), np.eye(2))
    save_json(tmp_path / "bad.json", QuantumComb(R, (2, 2)))
    code, out, _ = run(capsys, "validate", "--comb", str(tmp_path / "bad.json"), "--json")
    assert code == 1 and json.loads(out)["residuals"][0] == pytest.approx(1)

    save_json(tmp_path / "t.json", Tester.from_state_and_povm(np.eye(2) / 2, pauli_povm()))
    assert run(capsys, "validate", "--tester", str(tmp_path / "t.json"))[0] == 0
    (tmp_path / "p.json").write_text(json.dumps(frame_to_dict(pauli_povm())))
    code, out, _ = run(capsys, "validate", "--povm", str(tmp_path / "p.json"), "--json")
    assert code == 0 and json.loads(out)["informationally_complete"]
    (tmp_path / "q.json").write_text(json.dumps(frame_to_dict([np.eye(2), np.eye(2)])))
    assert run(capsys, "validate", "--povm", str(tmp_path / "q.json"))[0] == 1


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "qtomo", "optimal-tester", "--kind", "qops", "--d", "2", "--json"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["eta_bound"] == 76
