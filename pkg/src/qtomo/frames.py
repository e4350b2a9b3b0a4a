"""Informationally complete POVMs, frame operators and dual frames.

A set of operators ``{P_l}`` on ``C^d`` is handled through its synthesis
matrix ``Lambda`` (columns ``|P_l>>``), so that ``Lambda f = sum_l f_l P_l``.
A dual frame ``{Q_l}`` satisfies ``sum_l |P_l>><<Q_l| = I`` and yields the
expansion coefficients ``f_l[X] = <<Q_l|X>>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import CHECK_TOL, ALGEBRA_TOL, PAULIS, hermitian_part, moore_penrose, operator_from_dict, operator_to_dict, projector, psd_power


def _stack(ops) -> np.ndarray:
    arr = np.asarray(ops, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected a stack of square operators, got shape {arr.shape}")
    return arr


def elements_of(obj) -> np.ndarray:
    """Element stack of a Povm, DualFrame, Tester or raw operator list."""
    return _stack(getattr(obj, "elements", obj))


@dataclass(frozen=True)
class Povm:
    elements: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "elements", _stack(self.elements))

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return self.elements.shape[0]

    def __iter__(self):
        return iter(self.elements)


@dataclass(frozen=True)
class DualFrame:
    elements: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "elements", _stack(self.elements))

    def __len__(self) -> int:
        return self.elements.shape[0]

    def coefficients(self, X: np.ndarray) -> np.ndarray:
        """``f_l[X] = <<Q_l|X>> = Tr[Q_l^dag X]``."""
        X = np.asarray(X)
        if X.shape != self.elements.shape[1:]:
            raise ValueError(f"operator shape {X.shape} does not match dual elements {self.elements.shape[1:]}")
        return np.einsum("lij,ij->l", self.elements.conj(), X)


@dataclass
class PovmDiagnostics:
    min_eigenvalues: np.ndarray
    completeness_residual: float
    tol: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(np.all(self.min_eigenvalues >= -self.tol) and self.completeness_residual <= self.tol)


def synthesis_matrix(elements) -> np.ndarray:
    """Matrix of ``Lambda``: column ``l`` is ``|P_l>>``."""
    E = elements_of(elements)
    return E.reshape(E.shape[0], -1).T


def validate_povm(P, tol: float = CHECK_TOL) -> PovmDiagnostics:
    E = elements_of(P)
    herm_err = np.max(np.abs(E - E.conj().transpose(0, 2, 1)))
    mins = np.array([np.linalg.eigvalsh(hermitian_part(e))[0] for e in E])
    if herm_err > tol:
        mins = np.minimum(mins, -herm_err)
    resid = float(np.linalg.norm(E.sum(axis=0) - np.eye(E.shape[1]), 2))
    return PovmDiagnostics(mins, resid, tol)


def frame_operator(P) -> np.ndarray:
    """``F = sum_l |P_l>><<P_l|`` on the ``d**2``-dimensional operator space."""
    L = synthesis_matrix(P)
    return L @ L.conj().T


def is_info_complete(P, tol: float = 1e-9) -> bool:
    w = np.linalg.eigvalsh(frame_operator(P))
    return bool(w[-1] > 0 and w[0] > tol * w[-1])


def _dual_from_columns(Q: np.ndarray, d: int) -> DualFrame:
    return DualFrame(Q.T.reshape(-1, d, d))


def canonical_dual(P, allow_singular: bool = False) -> DualFrame:
    """``|D_l>> = F^{-1} |P_l>>``.

    With ``allow_singular`` the Moore-Penrose inverse of ``F`` is used, giving
    a dual on the span of the frame only.
    """
    E = elements_of(P)
    F = frame_operator(E)
    if not allow_singular and not is_info_complete(E):
        raise np.linalg.LinAlgError("frame operator is singular: the set is not informationally complete")
    Finv = moore_penrose(F) if allow_singular else np.linalg.inv(F)
    return _dual_from_columns(Finv @ synthesis_matrix(E), E.shape[1])


def alternate_dual(P, D, Y) -> DualFrame:
    """``Q_l = D_l + Y_l - sum_j <<D_l|P_j>> Y_j`` for arbitrary ``Y_l``."""
    PE, DE, YE = elements_of(P), elements_of(D), elements_of(Y)
    if not (PE.shape == DE.shape == YE.shape):
        raise ValueError(f"shape mismatch: {PE.shape}, {DE.shape}, {YE.shape}")
    gram = np.einsum("lij,kij->lk", DE.conj(), PE)
    return DualFrame(DE + YE - np.einsum("lk,kij->lij", gram, YE))


def dual_residual(P, Q) -> float:
    """Operator norm of ``sum_l |P_l>><<Q_l| - I``."""
    PE, QE = elements_of(P), elements_of(Q)
    if PE.shape != QE.shape:
        raise ValueError(f"shape mismatch {PE.shape} vs {QE.shape}")
    M = synthesis_matrix(PE) @ synthesis_matrix(QE).conj().T
    return float(np.linalg.norm(M - np.eye(M.shape[0]), 2))


def verify_dual(P, Q, tol: float = ALGEBRA_TOL) -> bool:
    return dual_residual(P, Q) <= tol


def frame_bounds(P) -> tuple[float, float]:
    w = np.linalg.eigvalsh(frame_operator(P))
    return float(w[0]), float(w[-1])


# ---------------------------------------------------------------------------
# standard POVMs

def pauli_eigenstates() -> np.ndarray:
    """Eigenvectors ordered x+, x-, y+, y-, z+, z-."""
    s = 1 / np.sqrt(2)
    return np.array([[s, s], [s, -s], [s, 1j * s], [s, -1j * s], [1, 0], [0, 1]], dtype=complex)


def pauli_povm() -> Povm:
    """Six-outcome qubit POVM ``{|psi_{i+-}><psi_{i+-}| / 3}``, axes x, y, z."""
    return Povm(np.array([projector(v) / 3 for v in pauli_eigenstates()]))


def computational_povm(d: int) -> Povm:
    return Povm(np.array([projector(np.eye(d)[k]) for k in range(d)]))


def covariant_povm(seed: np.ndarray, unitaries, tol: float = CHECK_TOL) -> Povm:
    """Orbit POVM ``{c U_g xi U_g^dag / |G|}`` with ``c = d / Tr[xi]``.

    ``c`` makes the set complete whenever the unitaries form a 1-design;
    otherwise the completeness residual is checked and an error raised.
    """
    seed = np.asarray(seed, dtype=complex)
    d = seed.shape[0]
    if seed.shape != (d, d) or np.min(np.linalg.eigvalsh(hermitian_part(seed))) < -tol or not np.allclose(seed, seed.conj().T, atol=tol):
        raise ValueError("seed must be a positive semidefinite operator")
    U = _stack(unitaries)
    if U.shape[1] != d:
        raise ValueError("unitaries and seed dimensions differ")
    tr = np.trace(seed).real
    if tr <= tol:
        raise ValueError("seed has zero trace")
    elems = (d / tr) * np.einsum("gij,jk,glk->gil", U, seed, U.conj()) / U.shape[0]
    povm = Povm(elems)
    diag = validate_povm(povm, tol=max(tol, 1e-8))
    if diag.completeness_residual > max(tol, 1e-8):
        raise ValueError(f"orbit does not resolve the identity (residual {diag.completeness_residual:.3e}); "
                         "the unitary set is not a 1-design")
    return povm


def product_povm(P1, P2) -> Povm:
    """Outcomes ``(a, b)`` flattened as ``a * len(P2) + b``; elements ``A_a (x) B_b``."""
    A, B = elements_of(P1), elements_of(P2)
    E = np.einsum("aij,bkl->abikjl", A, B)
    n, m = len(A), len(B)
    return Povm(E.reshape(n * m, A.shape[1] * B.shape[1], A.shape[1] * B.shape[1]))


def mub_povm(d: int) -> Povm:
    """Projectors onto the ``d + 1`` mutually unbiased bases, weight ``1/(d+1)``.

    Built as the Clifford orbit of ``|0><0|`` with duplicates merged, so it
    exists for prime ``d`` only.
    """
    from .designs import clifford_group

    U = clifford_group(d)
    orbit = U[:, :, 0]
    seen = {}
    for v in orbit:
        P = np.outer(v, v.conj())
        key = (np.round(P, 8) + 0.0).tobytes()
        seen.setdefault(key, P)
    E = np.array(list(seen.values())) / (d + 1)
    if len(E) != d * (d + 1):
        raise RuntimeError(f"expected {d * (d + 1)} stabilizer states, found {len(E)}")
    return Povm(E)


def standard_ic_povm(d: int, rng=0) -> Povm:
    """Default IC measurement: the Pauli POVM for qubits, MUB projectors for
    odd prime ``d``, a seeded random IC POVM otherwise."""
    if d == 2:
        return pauli_povm()
    try:
        return mub_povm(d)
    except ValueError:
        return random_ic_povm(d, rng=rng)


def random_povm(d: int, n: int, rng=None, rank: int | None = 1) -> Povm:
    """Random POVM with ``n`` outcomes built as ``S^{-1/2} A_l S^{-1/2}``."""
    rng = np.random.default_rng(rng)
    r = rank or d
    ops = []
    for _ in range(n):
        G = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
        ops.append(G @ G.conj().T)
    A = np.array(ops)
    S_inv_half = psd_power(A.sum(axis=0), -0.5)
    return Povm(np.einsum("ij,ljk,km->lim", S_inv_half, A, S_inv_half))


def random_ic_povm(d: int, n: int | None = None, rng=None, rank: int | None = 1) -> Povm:
    n = d * d + 2 if n is None else n
    if n < d * d:
        raise ValueError("an informationally complete POVM needs at least d**2 outcomes")
    rng = np.random.default_rng(rng)
    while True:
        P = random_povm(d, n, rng, rank)
        if is_info_complete(P):
            return P


def pauli_expansion(X: np.ndarray) -> np.ndarray:
    """``(Tr X, Tr X s_x, Tr X s_y, Tr X s_z)`` for a qubit operator."""
    return np.array([np.trace(X)] + [np.trace(X @ s) for s in PAULIS])


# ---------------------------------------------------------------------------
# serialization

def frame_to_dict(obj) -> dict:
    E = elements_of(obj)
    return {"dimension": int(E.shape[1]), "elements": [operator_to_dict(e) for e in E]}


def povm_from_dict(data: dict, check: bool = True) -> Povm:
    E = _frame_elements(data)
    P = Povm(E)
    if check and not validate_povm(P, tol=1e-8).passed:
        raise ValueError("serialized POVM fails positivity/completeness checks")
    return P


def dual_from_dict(data: dict) -> DualFrame:
    return DualFrame(_frame_elements(data))


def _frame_elements(data: dict) -> np.ndarray:
    try:
        d = int(data["dimension"])
        E = np.array([operator_from_dict(e) for e in data["elements"]])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed frame record: {exc}") from exc
    if E.ndim != 3 or E.shape[1:] != (d, d):
        raise ValueError("element shapes do not match the dimension header")
    return E
