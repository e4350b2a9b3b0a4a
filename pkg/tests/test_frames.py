import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qtomo.designs import clifford_group
from qtomo.frames import (DualFrame, alternate_dual, canonical_dual, computational_povm, covariant_povm,
                          dual_from_dict, dual_residual, frame_bounds, frame_operator, frame_to_dict,
                          is_info_complete, mub_povm, pauli_povm, povm_from_dict, product_povm, random_ic_povm,
                          standard_ic_povm, validate_povm, verify_dual)
from qtomo.linalg import PAULIS, random_operator, vec
from qtomo.optimal import optimal_seed

seeds = st.integers(0, 2 ** 31)


def test_validate_povm_examples():
    assert validate_povm(pauli_povm()).passed
    assert validate_povm([np.eye(2)]).passed
    diag = validate_povm([np.eye(2), np.eye(2)])
    assert not diag.passed and diag.completeness_residual == pytest.approx(1)


def test_validate_povm_negative_element():
    diag = validate_povm([np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])])
    assert not diag.passed and diag.min_eigenvalues.min() == pytest.approx(-0.5)


def test_frame_operator_single_element():
    F = frame_operator([np.eye(2)])
    w = np.linalg.eigvalsh(F)
    assert np.allclose(w, [0, 0, 0, 2])


def test_pauli_frame_spectrum():
    # hand oracle: F|I>> = (2/3)/2 |I>> ... i.e. eigenvalue 1/3 on I/sqrt2, 1/9 on each sigma/sqrt2
    F = frame_operator(pauli_povm())
    assert np.allclose(np.linalg.eigvalsh(F), [1 / 9, 1 / 9, 1 / 9, 1 / 3], atol=1e-12)
    I = vec(np.eye(2))
    assert np.vdot(I, F @ I).real == pytest.approx(2 / 3)
    assert np.allclose(F, F.conj().T)


def test_is_info_complete_examples():
    assert is_info_complete(pauli_povm())
    assert not is_info_complete(computational_povm(2))


def test_covariant_seed_povm_is_ic():
    for d in (2, 3):
        s = optimal_seed("qops", d)
        xi = s.Psi @ s.Psi.conj().T
        P = covariant_povm(xi, clifford_group(d))
        assert validate_povm(P).passed
        assert is_info_complete(P)


def test_covariant_povm_examples():
    U = clifford_group(2)
    P = covariant_povm(np.eye(2) / 2, U)
    # rescaled to resolve the identity: each element is I / |G|
    assert np.allclose(P.elements, np.eye(2) / len(U))
    paulis = np.array([np.eye(2), *PAULIS])
    P = covariant_povm(np.diag([1.0, 0.0]), paulis)
    assert len(P) == 4 and validate_povm(P).passed
    # explicit sum oracle: weights 1/2 on |0><0| (I, Z) and on |1><1| (X, Y)
    assert np.allclose(P.elements.sum(axis=0), np.eye(2))
    assert np.allclose(P.elements[0], np.diag([0.5, 0]))


def test_covariant_povm_errors():
    with pytest.raises(ValueError):
        covariant_povm(np.diag([1.0, -1.0]), clifford_group(2))
    with pytest.raises(ValueError):
        covariant_povm(np.diag([1.0, 0.0]), [np.eye(2)])


def test_pauli_povm_structure():
    P = pauli_povm()
    assert len(P) == 6
    assert np.allclose(np.trace(P.elements, axis1=1, axis2=2), 1 / 3)
    assert np.allclose(P.elements.sum(axis=0), np.eye(2))
    p = np.einsum("lij,ji->l", P.elements, np.eye(2) / 2).real
    assert np.allclose(p, 1 / 6)


def test_pauli_canonical_dual_hand_oracle():
    D = canonical_dual(pauli_povm())
    for i, s in enumerate(PAULIS):
        assert np.allclose(D.elements[2 * i], np.eye(2) / 2 + 1.5 * s, atol=1e-12)
        assert np.allclose(D.elements[2 * i + 1], np.eye(2) / 2 - 1.5 * s, atol=1e-12)


def test_canonical_dual_singular_raises():
    with pytest.raises(np.linalg.LinAlgError):
        canonical_dual(computational_povm(2))


def test_canonical_dual_unique_on_span():
    P = computational_povm(3)
    D = canonical_dual(P, allow_singular=True)
    # linearly independent elements: D_l are biorthogonal to the P_l
    G = np.einsum("lij,kij->lk", D.elements.conj(), P.elements)
    assert np.allclose(G, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("k", range(50))
def test_canonical_dual_random_ic(k):
    d = 2 + k % 2
    P = random_ic_povm(d, rng=k)
    assert verify_dual(P, canonical_dual(P))


def test_alternate_dual_examples(rng):
    P = pauli_povm()
    D = canonical_dual(P)
    assert np.allclose(alternate_dual(P, D, np.zeros((6, 2, 2))).elements, D.elements)
    assert verify_dual(P, alternate_dual(P, D, D.elements))
    with pytest.raises(ValueError):
        alternate_dual(P, D, np.zeros((5, 2, 2)))


@given(seeds)
def test_alternate_dual_random_y(seed):
    P = pauli_povm()
    Y = random_operator((6, 2, 2), seed)
    assert verify_dual(P, alternate_dual(P, canonical_dual(P), Y))


def test_zero_frame_is_not_dual():
    assert not verify_dual(pauli_povm(), DualFrame(np.zeros((6, 2, 2))))
    assert dual_residual(pauli_povm(), np.zeros((6, 2, 2))) == pytest.approx(1)


@given(seeds)
def test_frame_bounds_quadratic_form(seed):
    rng = np.random.default_rng(seed)
    P = random_ic_povm(2, rng=rng)
    a, b = frame_bounds(P)
    X = random_operator((2, 2), rng)
    q = float(np.sum(np.abs(np.einsum("lij,ij->l", P.elements.conj(), X)) ** 2))
    n2 = np.linalg.norm(X) ** 2
    assert a * n2 - 1e-10 <= q <= b * n2 + 1e-10
    w, V = np.linalg.eigh(frame_operator(P))
    c = V.conj().T @ vec(X)
    assert abs(q - np.dot(w, np.abs(c) ** 2)) < 1e-10


@given(seeds)
def test_dual_reconstruction(seed):
    rng = np.random.default_rng(seed)
    P = random_ic_povm(3, rng=rng)
    Q = alternate_dual(P, canonical_dual(P), random_operator((len(P), 3, 3), rng))
    X = random_operator((3, 3), rng)
    rec = np.einsum("l,lij->ij", Q.coefficients(X), P.elements)
    assert np.linalg.norm(rec - X) < 1e-9


def test_canonical_dual_is_a_frame():
    P = random_ic_povm(2, rng=3)
    assert is_info_complete(canonical_dual(P).elements)


def test_standard_povms():
    assert len(mub_povm(3)) == 12 and is_info_complete(mub_povm(3))
    for d, n in [(2, 6), (3, 12), (4, 18), (5, 30)]:
        P = standard_ic_povm(d)
        assert len(P) == n
        assert validate_povm(P).passed and is_info_complete(P)
    PP = product_povm(pauli_povm(), computational_povm(2))
    assert len(PP) == 12 and validate_povm(PP).passed
    assert np.allclose(PP.elements[3], np.kron(pauli_povm().elements[1], np.diag([0, 1.0])))


def test_frame_json_roundtrip():
    P = pauli_povm()
    data = json.loads(json.dumps(frame_to_dict(P)))
    assert data["dimension"] == 2
    assert np.array_equal(povm_from_dict(data).elements, P.elements)
    D = canonical_dual(P)
    assert np.array_equal(dual_from_dict(frame_to_dict(D)).elements, D.elements)
    with pytest.raises(ValueError):
        povm_from_dict(frame_to_dict([np.eye(2), np.eye(2)]))
