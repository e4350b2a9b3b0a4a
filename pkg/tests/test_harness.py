import json
import math

import numpy as np
import pytest
from scipy import stats

from qtomo.combs import Tester
from qtomo.devices import random_channel
from qtomo.frames import computational_povm, frame_to_dict, pauli_povm
from qtomo.harness import (ExperimentConfig, compare_duals, load_povm_spec, process_observables, read_record,
                           run_experiment, sample_counts, write_record)
from qtomo.linalg import random_density
from qtomo.optimal import subspace_projector


# ---------------------------------------------------------------------------
# config

def test_config_validation():
    for bad in ({"task": "x"}, {"d": 1}, {"shots": 0}, {"trials": 0}, {"dual": "x"}, {"noise": 2.0},
                {"kind": "x"}, {"task": "process", "dual": "maxlik"}):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
    assert ExperimentConfig.from_dict({"d": 3}).d == 3


def test_povm_specs(tmp_path):
    assert len(load_povm_spec("pauli6", 2)) == 6
    assert len(load_povm_spec("covariant", 3)) == 12
    with pytest.raises(ValueError):
        load_povm_spec("pauli6", 3)
    with pytest.raises(ValueError):
        load_povm_spec("nope", 2)
    f = tmp_path / "p.json"
    f.write_text(json.dumps(frame_to_dict(pauli_povm())))
    assert len(load_povm_spec(f"file:{f}", 2)) == 6
    with pytest.raises(ValueError):
        load_povm_spec(f"file:{f}", 3)


# ---------------------------------------------------------------------------
# sampling

def test_sample_counts_examples(rng):
    c = sample_counts(pauli_povm(), np.eye(2) / 2, 1, rng)
    assert c.sum() == 1 and c.max() == 1
    c = sample_counts(computational_povm(2), np.diag([1.0, 0]), 500, rng)
    assert list(c) == [500, 0]
    with pytest.raises(ValueError):
        sample_counts(pauli_povm(), np.diag([2.0, -1.0]), 10, rng)


def test_sample_counts_chi_square():
    rng = np.random.default_rng(11)
    rho = random_density(2, rng)
    P = pauli_povm()
    p = np.einsum("ij,lji->l", rho, P.elements).real
    N = 10 ** 5
    c = sample_counts(P, rho, N, rng)
    chi2 = np.sum((c - N * p) ** 2 / (N * p))
    assert stats.chi2.sf(chi2, len(p) - 1) > 1e-3


def test_sample_counts_tester(rng):
    T = Tester.from_state_and_povm(np.eye(2) / 2, pauli_povm())
    c = sample_counts(T, random_channel(2, rng=rng), 100, rng)
    assert c.sum() == 100 and len(c) == 6


# ---------------------------------------------------------------------------
# experiments

def test_state_exact_mode():
    rec = run_experiment(ExperimentConfig(task="state", shots=None, trials=3))
    assert np.allclose(rec.estimates, rec.truth, atol=1e-9)
    assert np.allclose(rec.mse, 0, atol=1e-18)


@pytest.mark.parametrize("task,extra", [("process", {"kind": "unital"}), ("process", {"kind": "qops"}),
                                        ("povm", {})])
def test_exact_modes(task, extra):
    rec = run_experiment(ExperimentConfig(task=task, shots=None, trials=2, **extra))
    assert np.allclose(rec.estimates, rec.truth, atol=1e-9)


def test_state_ratio_close():
    rec = run_experiment(ExperimentConfig(task="state", shots=10 ** 4, trials=200, seed=1))
    assert abs(rec.ratio - 1) < 0.2
    assert np.all(rec.bias_z() < 4)


def test_variance_scales_as_one_over_n():
    a = run_experiment(ExperimentConfig(task="state", shots=1000, trials=400, seed=2))
    b = run_experiment(ExperimentConfig(task="state", shots=4000, trials=400, seed=2))
    ratio = a.variance.sum() / b.variance.sum()
    assert ratio == pytest.approx(4, rel=0.15)


def test_noisy_state_unbiased():
    rec = run_experiment(ExperimentConfig(task="state", shots=2000, trials=200, noise=0.3, seed=4))
    assert np.all(rec.bias_z() < 4)
    assert abs(rec.ratio - 1) < 0.25


def test_maxlik_state_task():
    rec = run_experiment(ExperimentConfig(task="state", dual="maxlik", shots=200, trials=5))
    assert rec.analytic is None and rec.ratio is None
    assert rec.estimates.shape == (5, 3)


def test_process_record_contents():
    rec = run_experiment(ExperimentConfig(task="process", kind="unital", shots=200, trials=4, seed=3))
    assert rec.extra["eta_analytic"] == pytest.approx(28)
    assert "index_map" in rec.extra and "eta_empirical" in rec.extra
    assert rec.estimates.shape == (4, 10)


def test_process_observables_span_subspaces():
    for kind in ("qops", "channels", "unital"):
        X = process_observables(kind, 2)
        V = X.reshape(len(X), -1)
        assert np.allclose(V.conj() @ V.T, np.eye(len(X)), atol=1e-12)
        assert np.allclose(V.T @ V.conj(), subspace_projector(kind, 2), atol=1e-12)


def test_povm_task_ratio():
    rec = run_experiment(ExperimentConfig(task="povm", model="pauli6", shots=5000, trials=100, seed=5))
    assert abs(rec.ratio - 1) < 0.25


def test_determinism():
    cfg = ExperimentConfig(task="state", shots=300, trials=10, seed=9)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert np.array_equal(a.estimates, b.estimates)
    assert a.summary() == b.summary()


def test_compare_duals_skewed_and_symmetric():
    rows = compare_duals(ExperimentConfig(task="state", prior="skewed", shots=1000, trials=50))
    by = {r["dual"]: r for r in rows}
    assert by["optimal"]["analytic_prior"] < by["canonical"]["analytic_prior"]
    rows = compare_duals(ExperimentConfig(task="state", prior="uniform", shots=1000, trials=50))
    by = {r["dual"]: r for r in rows}
    assert by["optimal"]["analytic_prior"] == pytest.approx(by["canonical"]["analytic_prior"], rel=1e-10)
    assert by["optimal"]["mse"] == pytest.approx(by["canonical"]["mse"], rel=1e-8)


def test_maxlik_bias_contrast():
    cfg = ExperimentConfig(task="state", model="pure", shots=30, trials=300, seed=6)
    rows = {r["dual"]: r for r in compare_duals(cfg, ("optimal", "maxlik"))}
    avg = run_experiment(cfg)
    ml = run_experiment(ExperimentConfig(**{**cfg.__dict__, "dual": "maxlik"}))
    # averaging stays unbiased; the constrained estimate shrinks toward the interior
    assert np.all(avg.bias_z() < 4)
    se = np.sqrt(ml.variance / ml.estimates.shape[0])
    assert np.max(np.abs(ml.mean - ml.truth) / se) > 4
    assert rows["maxlik"]["mse"] < rows["optimal"]["mse"]


# ---------------------------------------------------------------------------
# records

@pytest.mark.parametrize("cfg", [ExperimentConfig(task="state", shots=100, trials=3),
                                 ExperimentConfig(task="process", shots=50, trials=2),
                                 ExperimentConfig(task="povm", shots=100, trials=2)])
def test_record_roundtrip(tmp_path, cfg):
    rec = run_experiment(cfg)
    write_record(tmp_path / "r.json", rec)
    back = read_record(tmp_path / "r.json")
    assert back.config == rec.config and back.observables == rec.observables
    assert np.array_equal(back.estimates, rec.estimates)
    assert np.array_equal(back.truth, rec.truth)
    assert back.summary() == rec.summary()


def test_record_sidecar_columns(tmp_path):
    rec = run_experiment(ExperimentConfig(task="state", shots=100, trials=2, out=str(tmp_path / "r.json")))
    header = (tmp_path / "r.trials.csv").read_text().splitlines()[0]
    assert header == "trial,observable,estimate_re,estimate_im,sq_error"
    assert math.isfinite(rec.wall_clock)


def test_read_record_malformed(tmp_path):
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(ValueError):
        read_record(tmp_path / "bad.json")
