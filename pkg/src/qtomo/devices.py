"""Channels and measurements as Choi operators.

A map ``C: L(H_in) -> L(H_out)`` is stored as

    R = sum_k |K_k>><<K_k| = (C (x) I)(|I>><<I|)     on H_out (x) H_in,

output factor first.  The action is ``C(rho) = Tr_in[(I (x) rho^T) R]`` and
trace preservation reads ``Tr_out[R] = I_in``.

Ancilla-assisted tomography feeds one half of a bipartite state ``T`` on
``H_sys (x) H_anc`` to the unknown device.  ``T`` is faithful when the map
``P -> Tr_sys[(P (x) I) T]`` is invertible; equivalently the realigned
matrix of ``T`` is invertible.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frames import DualFrame, Povm, canonical_dual, elements_of, product_povm, standard_ic_povm
from .linalg import (CHECK_TOL, SubsystemShape, haar_random_unitary, is_psd, link_product, operator_from_dict,
                     operator_to_dict, partial_trace, realign, unrealign, vec)
from .processing import max_likelihood, optimal_dual, probabilities

KINDS = ("operation", "channel", "unital")


def _out_in_shape(d_out: int, d_in: int, out_label: int = 1, in_label: int = 0) -> SubsystemShape:
    return SubsystemShape((d_out, d_in), (out_label, in_label))


def classify_choi(R: np.ndarray, d_out: int, d_in: int, tol: float = CHECK_TOL) -> str | None:
    """Strongest tag the operator satisfies, or ``None`` if it is not CP."""
    if not is_psd(R, tol):
        return None
    if not np.allclose(partial_trace(R, (d_out, d_in), [0]), np.eye(d_in), atol=tol, rtol=0):
        return "operation"
    if d_out == d_in and np.allclose(partial_trace(R, (d_out, d_in), [1]), np.eye(d_out), atol=tol, rtol=0):
        return "unital"
    return "channel"


@dataclass(frozen=True)
class ChoiOperator:
    """Choi operator ``R`` on ``H_out (x) H_in`` with a class tag.

    ``kind=None`` skips validation; estimates produced by tomography are
    stored that way since finite statistics need not yield a CP operator.
    """

    R: np.ndarray
    d_out: int
    d_in: int
    kind: str | None = "operation"
    tol: float = CHECK_TOL

    def __post_init__(self):
        R = np.asarray(self.R, dtype=complex)
        D = self.d_out * self.d_in
        if R.shape != (D, D):
            raise ValueError(f"Choi operator of shape {R.shape} inconsistent with dims ({self.d_out}, {self.d_in})")
        object.__setattr__(self, "R", R)
        if self.kind is None:
            return
        if self.kind not in KINDS:
            raise ValueError(f"unknown class tag {self.kind!r}")
        actual = classify_choi(R, self.d_out, self.d_in, self.tol)
        if actual is None:
            raise ValueError("Choi operator is not positive semidefinite (map not completely positive)")
        if KINDS.index(actual) < KINDS.index(self.kind):
            raise ValueError(f"operator tagged {self.kind!r} only satisfies {actual!r}")

    @property
    def shape(self) -> SubsystemShape:
        return _out_in_shape(self.d_out, self.d_in)

    def superoperator(self) -> np.ndarray:
        return realign(self.R, self.d_out, self.d_in)

    def adjoint(self) -> "ChoiOperator":
        """Choi operator of the dual map (Heisenberg <-> Schroedinger)."""
        S = self.superoperator().conj().T
        Rd = unrealign(S, self.d_in, self.d_out)
        return ChoiOperator(Rd, self.d_in, self.d_out, kind=None)

    def to_dict(self) -> dict:
        return {"dims": {"d_out": self.d_out, "d_in": self.d_in}, "kind": self.kind,
                "operator": operator_to_dict(self.R)}

    @classmethod
    def from_dict(cls, data: dict) -> "ChoiOperator":
        try:
            dims = data["dims"]
            return cls(operator_from_dict(data["operator"]), int(dims["d_out"]), int(dims["d_in"]),
                       data.get("kind", "operation"))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed Choi record: {exc}") from exc


def choi_from_kraus(K) -> ChoiOperator:
    K = np.asarray(K, dtype=complex)
    if K.ndim == 2:
        K = K[None]
    if K.ndim != 3:
        raise ValueError("expected a list of Kraus matrices")
    d_out, d_in = K.shape[1:]
    V = K.reshape(len(K), -1)
    R = V.T @ V.conj()
    tp = np.allclose(np.einsum("kji,kjl->il", K.conj(), K), np.eye(d_in), atol=1e-10)
    kind = classify_choi(R, d_out, d_in) if tp else "operation"
    return ChoiOperator(R, d_out, d_in, kind)


def kraus_action(K, rho: np.ndarray) -> np.ndarray:
    K = np.asarray(K, dtype=complex)
    return np.einsum("kij,jl,kml->im", K, rho, K.conj())


def apply_channel(R: ChoiOperator, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (R.d_in, R.d_in):
        raise ValueError(f"input of shape {rho.shape} does not fit a map with d_in={R.d_in}")
    T = R.R.reshape(R.d_out, R.d_in, R.d_out, R.d_in)
    return np.einsum("aibj,ij->ab", T, rho)


def compose(R2: ChoiOperator, R1: ChoiOperator) -> ChoiOperator:
    """Choi operator of ``C2 o C1`` via the link product over the middle wire."""
    if R1.d_out != R2.d_in:
        raise ValueError("intermediate dimensions differ")
    out, shape = link_product(R2.R, _out_in_shape(R2.d_out, R2.d_in, 2, 1),
                              R1.R, _out_in_shape(R1.d_out, R1.d_in, 1, 0))
    assert shape.labels == (2, 0)
    kind = None if R1.kind is None or R2.kind is None else "operation"
    return ChoiOperator(out, R2.d_out, R1.d_in, kind)


def identity_channel(d: int) -> ChoiOperator:
    return choi_from_kraus(np.eye(d)[None])


def unitary_channel(U: np.ndarray) -> ChoiOperator:
    return choi_from_kraus(np.asarray(U)[None])


def depolarizing_channel(p: float, d: int = 2, picture: str = "schrodinger") -> ChoiOperator:
    """``D_p(X) = (1 - p) X + (p / d) Tr[X] I``.

    The map is self-adjoint, so both pictures give the same operator; the
    flag is accepted for symmetry with :func:`processing.unbias_noise`.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing parameter {p} outside [0, 1]")
    if picture not in ("schrodinger", "heisenberg"):
        raise ValueError(f"unknown picture {picture!r}")
    v = vec(np.eye(d, dtype=complex))
    R = (1 - p) * np.outer(v, v) + (p / d) * np.eye(d * d)
    return ChoiOperator(R, d, d, "unital")


def random_kraus(d_in: int, d_out: int | None = None, rank: int = 2, rng=None) -> np.ndarray:
    """Kraus operators of a random channel from a Haar-random isometry."""
    d_out = d_in if d_out is None else d_out
    U = haar_random_unitary(d_out * rank, rng)
    V = U[:, :d_in]
    return V.reshape(rank, d_out, d_in)


def random_channel(d_in: int, d_out: int | None = None, rank: int = 2, rng=None) -> ChoiOperator:
    return choi_from_kraus(random_kraus(d_in, d_out, rank, rng))


def random_unital_channel(d: int, n_unitaries: int = 3, rng=None) -> ChoiOperator:
    """Random mixture of unitary channels."""
    rng = np.random.default_rng(rng)
    w = rng.dirichlet(np.ones(n_unitaries))
    U = haar_random_unitary(d, rng, size=n_unitaries)
    return choi_from_kraus(np.sqrt(w)[:, None, None] * U)


def save_choi(path, R: ChoiOperator) -> None:
    Path(path).write_text(json.dumps(R.to_dict()))


def load_choi(path) -> ChoiOperator:
    return ChoiOperator.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# faithful states

@dataclass(frozen=True)
class FaithfulState:
    """Bipartite state ``T`` on ``H_sys (x) H_anc`` together with its induced map.

    ``matrix`` satisfies ``vec(T(P)) = matrix @ vec(P)`` for
    ``T(P) = Tr_sys[(P (x) I) T]``.
    """

    T: np.ndarray
    d_sys: int
    d_anc: int
    matrix: np.ndarray
    singular_values: np.ndarray

    @property
    def condition_number(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else np.inf

    @property
    def realigned(self) -> np.ndarray:
        return realign(self.T, self.d_sys, self.d_anc)

    def apply(self, P: np.ndarray) -> np.ndarray:
        return (self.matrix @ vec(P)).reshape(self.d_anc, self.d_anc)

    def invert(self, rho: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.matrix, vec(rho)).reshape(self.d_sys, self.d_sys)


def faithful_map_matrix(T: np.ndarray, d_sys: int, d_anc: int) -> np.ndarray:
    Tt = np.asarray(T).reshape(d_sys, d_anc, d_sys, d_anc)
    # T(P)[c, e] = sum_{x, y} P[y, x] T[x, c, y, e]
    M = np.einsum("xcye->ceyx", Tt)
    return M.reshape(d_anc * d_anc, d_sys * d_sys)


def is_faithful(T: np.ndarray, d_sys: int | None = None, tol: float = 1e-10) -> FaithfulState | None:
    """Return the :class:`FaithfulState` for ``T`` or ``None`` if the map is singular.

    ``d_sys`` defaults to the square root of the total dimension, with the
    ancilla of the same size.
    """
    T = np.asarray(T, dtype=complex)
    D = T.shape[0]
    if d_sys is None:
        d_sys = int(round(np.sqrt(D)))
    if D % d_sys:
        raise ValueError("total dimension not divisible by d_sys")
    d_anc = D // d_sys
    if not is_psd(T) or abs(np.trace(T) - 1) > CHECK_TOL:
        raise ValueError("T must be a density operator")
    M = faithful_map_matrix(T, d_sys, d_anc)
    s = np.linalg.svd(M, compute_uv=False)
    if d_sys != d_anc or s[-1] <= tol:
        return None
    return FaithfulState(T, d_sys, d_anc, M, s)


def max_entangled_state(d: int) -> np.ndarray:
    v = vec(np.eye(d, dtype=complex)) / np.sqrt(d)
    return np.outer(v, v.conj())


def _resolve_dual(P: Povm, dual) -> DualFrame:
    if isinstance(dual, DualFrame):
        return dual
    if dual == "canonical":
        return canonical_dual(P)
    if dual == "optimal":
        return optimal_dual(P)
    raise ValueError(f"unknown dual choice {dual!r}")


def _frequencies(p: np.ndarray, shots: int | None, rng) -> np.ndarray:
    p = np.clip(p.real, 0, None)
    p = p / p.sum()
    if shots is None:
        return p
    rng = np.random.default_rng(rng)
    return rng.multinomial(shots, p) / shots


def process_tomography(R_true: ChoiOperator, T: FaithfulState, povm: Povm | None = None, dual="canonical",
                       shots: int | None = None, rng=None) -> ChoiOperator:
    """Simulated ancilla-assisted process tomography.

    The output state ``S = (C (x) I)(T)`` is measured with ``povm`` (default:
    product of the standard IC POVMs on output and ancilla), estimated as
    ``sum_l nu_l Q_l^dag`` and mapped back through the inverse of ``T``.
    ``shots=None`` uses exact probabilities.
    """
    if T is None:
        raise ValueError("process tomography needs a faithful input state")
    if R_true.d_in != T.d_sys:
        raise ValueError("channel input and probe dimensions differ")
    S, _ = link_product(R_true.R, _out_in_shape(R_true.d_out, R_true.d_in, 2, 0),
                        T.T, SubsystemShape((T.d_sys, T.d_anc), (0, 1)))
    if povm is None:
        povm = product_povm(standard_ic_povm(R_true.d_out), standard_ic_povm(T.d_anc))
    Q = _resolve_dual(povm, dual)
    nu = _frequencies(probabilities(povm, S, check=False), shots, rng)
    S_hat = np.einsum("l,lji->ij", nu, elements_of(Q).conj())
    St = realign(S_hat, R_true.d_out, T.d_anc)
    Rt = St @ np.linalg.inv(T.realigned)
    return ChoiOperator(unrealign(Rt, R_true.d_out, R_true.d_in), R_true.d_out, R_true.d_in, kind=None)


def povm_tomography(M_true: Povm, T: FaithfulState, shots: int | None = None, rng=None,
                    probe_povm: Povm | None = None, dual="optimal", estimator: str = "average") -> Povm:
    """Simulated POVM tomography through conditional ancilla states.

    Joint outcomes ``(i, l)`` of the unknown POVM and an IC POVM on the
    ancilla are sampled.  Each element is rebuilt as
    ``rate_i * T^{-1}(rho_i)`` where ``rho_i`` is the estimated conditional
    state.  ``estimator="maxlik"`` replaces linear inversion of ``rho_i`` by
    maximum likelihood.  Never-observed outcomes yield a zero element and a
    warning.  The result is not checked for positivity.
    """
    if T is None:
        raise ValueError("POVM tomography needs a faithful input state")
    ME = elements_of(M_true)
    if ME.shape[1] != T.d_sys:
        raise ValueError("POVM and probe dimensions differ")
    if probe_povm is None:
        probe_povm = standard_ic_povm(T.d_anc)
    EE = elements_of(probe_povm)
    joint = np.einsum("iab,lce->ilacbe", ME, EE).reshape(len(ME) * len(EE), T.T.shape[0], T.T.shape[0])
    p = np.einsum("kij,ji->k", joint, T.T).real
    nu = _frequencies(p, shots, rng).reshape(len(ME), len(EE))
    if estimator == "average":
        Q = _resolve_dual(probe_povm, dual)
        QE = elements_of(Q)
    elif estimator != "maxlik":
        raise ValueError(f"unknown estimator {estimator!r}")
    out = np.zeros_like(ME)
    for i in range(len(ME)):
        rate = nu[i].sum()
        if rate <= 0:
            warnings.warn(f"outcome {i} never observed; its element is estimated as zero", RuntimeWarning)
            continue
        if estimator == "average":
            rho_i = np.einsum("l,lji->ij", nu[i] / rate, QE.conj())
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rho_i = max_likelihood(probe_povm, nu[i] / rate).rho
        out[i] = rate * T.invert(rho_i)
    return Povm(out)
