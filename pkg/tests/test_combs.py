import numpy as np
import pytest
from hypothesis import given, strategies as st

from _oracles import choi_from_kraus_loop
from qtomo.combs import (QuantumComb, Tester, comb_link, load_comb, load_tester, realize_tester, save_json,
                         tester_dual_expand, tester_probabilities, validate_comb)
from qtomo.devices import apply_channel, choi_from_kraus, identity_channel, random_channel, random_kraus
from qtomo.frames import computational_povm, pauli_povm
from qtomo.linalg import (SubsystemShape, link_product, partial_trace, partial_transpose, random_density,
                          random_operator, reorder_to, vec)
from qtomo.optimal import build_optimal_tester

seeds = st.integers(0, 2 ** 31)
MEM = 9     # label of the internal memory wire


def network(KA, KB, d, dm):
    """Two-tooth comb: A maps wire 0 to wire 1 plus memory, B maps wire 2 plus memory to wire 3."""
    RA = choi_from_kraus(KA).R          # (1, MEM) x 0
    RB = choi_from_kraus(KB).R          # 3 x (2, MEM)
    R, shape = link_product(RA, SubsystemShape((d, dm, d), (1, MEM, 0)),
                            RB, SubsystemShape((d, d, dm), (3, 2, MEM)))
    return QuantumComb(reorder_to(R, shape, [0, 1, 2, 3]), (d, d, d, d))


def random_network(rng, d=2, dm=2):
    KA = random_kraus(d, d * dm, 2, rng)
    KB = random_kraus(d * dm, d, 2, rng)
    return network(KA, KB, d, dm), KA, KB


# ---------------------------------------------------------------------------
# combs

@given(seeds)
def test_channel_choi_is_one_tooth_comb(seed):
    C = random_channel(2, 3, rng=np.random.default_rng(seed))
    comb = QuantumComb.from_choi(C)
    assert comb.N == 1 and comb.dims == (2, 3)
    assert validate_comb(comb).passed
    assert np.allclose(comb.to_choi().R, C.R)


def test_two_tooth_network_valid(rng):
    comb, _, _ = random_network(rng)
    diag = validate_comb(comb)
    assert diag.passed and len(diag.residuals) == 2
    # a non-normalized operator fails
    assert not validate_comb(comb.R * 1.1, comb.dims).passed


def test_network_with_inserted_channel_matches_kraus(rng):
    d, dm = 2, 2
    comb, KA, KB = random_network(rng, d, dm)
    KC = random_kraus(d, d, 2, rng)
    C = QuantumComb.from_choi(choi_from_kraus(KC), in_label=1, out_label=2)
    out = comb_link(comb, C)
    assert out.labels == (0, 3)
    # Kraus oracle: B (C (x) I_mem) A
    K = [b @ np.kron(c, np.eye(dm)) @ a for a in KA for b in KB for c in KC]
    assert np.allclose(out.to_choi().R, choi_from_kraus_loop(K), atol=1e-10)
    assert validate_comb(out).passed


def test_swapped_role_counterexample():
    for d in (2, 3):
        # replacement channel rho -> |0><0|: Choi |0><0| (x) I on out (x) in
        R = np.kron(np.diag(np.eye(d)[0]), np.eye(d))
        assert validate_comb(np.kron(np.eye(d), np.diag(np.eye(d)[0])), (d, d)).passed
        bad = validate_comb(R, (d, d))      # read with input and output exchanged
        assert not bad.passed
        assert bad.residuals[0] == pytest.approx(d - 1)


def test_max_entangled_is_role_symmetric():
    I = vec(np.eye(2))
    assert validate_comb(np.outer(I, I), (2, 2)).passed


def test_comb_errors():
    with pytest.raises(ValueError):
        QuantumComb(np.eye(8), (2, 2, 2))
    with pytest.raises(ValueError):
        QuantumComb(np.eye(4), (2, 2), (1, 0))
    with pytest.raises(ValueError):
        validate_comb(np.eye(4), (2, 2), N=2)
    C = QuantumComb.from_choi(identity_channel(2))
    with pytest.raises(ValueError):
        comb_link(C, C)


def test_link_with_identity_is_invariant(rng):
    R = random_channel(2, rng=rng)
    comb = QuantumComb.from_choi(R, 0, 1)
    out = comb_link(comb, QuantumComb.from_choi(identity_channel(2), 1, 2))
    assert out.labels == (0, 2)
    assert np.allclose(out.R, comb.R)


def test_link_associative(rng):
    A, B, C = (QuantumComb.from_choi(random_channel(2, rng=rng), k, k + 1) for k in range(3))
    left = comb_link(comb_link(A, B), C)
    right = comb_link(A, comb_link(B, C))
    assert np.allclose(left.R, right.R, atol=1e-10)


def test_causality_no_signalling(rng):
    comb, _, _ = random_network(rng)
    reduced = []
    for _ in range(5):
        tau = random_density(2, rng)
        R, shape = link_product(comb.R, comb.shape, tau, SubsystemShape((2,), (2,)))
        reduced.append(partial_trace(R, shape, [shape.index(3)]))
    for r in reduced[1:]:
        assert np.allclose(r, reduced[0], atol=1e-9)


def test_comb_json_roundtrip(tmp_path, rng):
    comb, _, _ = random_network(rng)
    save_json(tmp_path / "c.json", comb)
    back = load_comb(tmp_path / "c.json")
    assert np.array_equal(back.R, comb.R) and back.dims == comb.dims


# ---------------------------------------------------------------------------
# testers

def test_tester_validation():
    with pytest.raises(ValueError):
        Tester(np.array([np.eye(4)]), np.eye(2) / 2, 2)
    with pytest.raises(ValueError):
        Tester(np.array([np.eye(4) / 2]), np.eye(2), 2)


@given(seeds)
def test_state_povm_tester(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(2, rng)
    T = Tester.from_state_and_povm(rho, pauli_povm())
    R = random_channel(2, rng=rng)
    out = apply_channel(R, rho)
    expect = np.einsum("lij,ji->l", pauli_povm().elements, out).real
    assert np.allclose(tester_probabilities(T, R), expect, atol=1e-12)


def test_uniform_tester(rng):
    k = 5
    T = Tester(np.array([np.eye(4) / 2 / k] * k), np.eye(2) / 2, 2)
    assert np.allclose(tester_probabilities(T, random_channel(2, rng=rng)), 1 / k)
    with pytest.raises(ValueError):
        tester_probabilities(T, np.eye(9))


def test_probabilities_normalized_on_random_channels(rng):
    T = Tester.from_state_and_povm(random_density(2, rng), pauli_povm())
    for _ in range(100):
        p = tester_probabilities(T, random_channel(2, rng=rng))
        assert abs(p.sum() - 1) < 1e-10


def test_probabilistic_comb_set(rng):
    K = random_kraus(2, 2, 3, rng)
    parts = [np.outer(vec(k), vec(k).conj()) for k in K]
    T = Tester.from_state_and_povm(random_density(2, rng), pauli_povm())
    P = np.array([tester_probabilities(T, R) for R in parts])
    assert np.all((P >= -1e-12) & (P <= 1 + 1e-12))
    assert np.allclose(P.sum(axis=0), tester_probabilities(T, choi_from_kraus(K)))


def test_born_rule_is_full_link(rng):
    T = Tester.from_state_and_povm(random_density(2, rng), pauli_povm())
    R = random_channel(2, rng=rng)
    s = SubsystemShape((2, 2), (1, 0))
    for Pi, p in zip(T.elements, tester_probabilities(T, R)):
        val, _ = link_product(partial_transpose(Pi, (2, 2), [0, 1]), s, R.R, s)
        assert abs(val[0, 0] - p) < 1e-12


def test_realize_state_povm_tester(rng):
    rho = random_density(2, rng)
    T = Tester.from_state_and_povm(rho, computational_povm(2))
    Z = realize_tester(T)
    sq = Z.probe.reshape(2, 2)
    assert np.allclose(T.sigma, rho.T)
    assert np.allclose(sq @ sq.conj().T, T.sigma.T, atol=1e-10)
    assert np.allclose(Z.support_projector, np.eye(4), atol=1e-10)
    R = random_channel(2, rng=rng)
    assert np.allclose(Z.probabilities(R), tester_probabilities(T, R), atol=1e-10)


def test_realize_single_element_tester(rng):
    sigma = np.diag([1.0, 0.0])
    T = Tester(np.array([np.kron(np.eye(2), sigma)]), sigma, 2)
    Z = realize_tester(T)
    assert np.allclose(Z.povm[0], np.kron(np.eye(2), sigma))
    assert Z.probabilities(random_channel(2, rng=rng))[0] == pytest.approx(1)


def test_realize_optimal_tester(rng):
    T = build_optimal_tester("unital", 2)
    Z = realize_tester(T)
    for _ in range(10):
        R = random_channel(2, rng=rng)
        assert np.allclose(Z.probabilities(R), tester_probabilities(T, R), atol=1e-9)


def test_tester_dual_expand(rng):
    T = build_optimal_tester("qops", 2)
    A = random_operator((4, 4), rng)
    chk = tester_dual_expand(T, A=A)
    assert chk.complete and chk.residual <= 1e-9
    chk = tester_dual_expand(T, A=T.elements[0])
    assert chk.residual < 1e-9
    P = Tester.from_state_and_povm(np.eye(2) / 2, computational_povm(2))
    chk = tester_dual_expand(P, A=np.ones((4, 4)))
    assert not chk.complete and chk.residual > 0.1
    with pytest.raises(ValueError):
        tester_dual_expand(T, duals=np.zeros_like(T.elements), A=A)
    with pytest.raises(ValueError):
        tester_dual_expand(T)


def test_tester_json_roundtrip(tmp_path, rng):
    T = Tester.from_state_and_povm(random_density(2, rng), pauli_povm())
    save_json(tmp_path / "t.json", T)
    back = load_tester(tmp_path / "t.json")
    assert np.array_equal(back.elements, T.elements) and back.d_out == 2
