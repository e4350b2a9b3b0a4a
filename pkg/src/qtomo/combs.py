"""Quantum combs and testers.

A comb with ``N`` teeth acts on wires ``0 .. 2N-1``; even wires are inputs,
odd wires outputs, and the operator's tensor factors follow wire order.
Wire labels are global integers whose order encodes causal order, so the
free wires of a link product can be put back in causal order by sorting.

Note the factor order differs from :class:`devices.ChoiOperator`, which
puts the output first; :meth:`QuantumComb.from_choi` does the reordering.

A tester is the single-slot case with trivial first and last wires:
elements ``Pi_i`` on ``H_out (x) H_in`` with ``sum_i Pi_i = I (x) sigma``,
and outcome probabilities ``p_i = Tr[Pi_i R]`` for a channel Choi ``R``.
The transpose appearing in the link product is absorbed into ``Pi_i``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .devices import ChoiOperator
from .frames import canonical_dual, elements_of, synthesis_matrix
from .linalg import (CHECK_TOL, SubsystemShape, hermitian_part, is_psd, link_product, operator_from_dict,
                     operator_to_dict, partial_trace, permute_subsystems, psd_power, reorder_to, vec)


@dataclass(frozen=True)
class QuantumComb:
    R: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) % 2:
            raise ValueError("a comb has an even number of wires")
        labels = tuple(range(len(dims))) if self.labels is None else tuple(self.labels)
        R = np.asarray(self.R, dtype=complex)
        SubsystemShape(dims, labels).check(R)
        if list(labels) != sorted(labels):
            raise ValueError("wire labels must increase along causal order")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def N(self) -> int:
        return len(self.dims) // 2

    @property
    def shape(self) -> SubsystemShape:
        return SubsystemShape(self.dims, self.labels)

    @classmethod
    def from_choi(cls, C: ChoiOperator, in_label: int = 0, out_label: int = 1) -> "QuantumComb":
        R = permute_subsystems(C.R, (C.d_out, C.d_in), (1, 0))
        return cls(R, (C.d_in, C.d_out), (in_label, out_label))

    def to_choi(self) -> ChoiOperator:
        if self.N != 1:
            raise ValueError("only single-tooth combs are channels")
        d_in, d_out = self.dims
        return ChoiOperator(permute_subsystems(self.R, self.dims, (1, 0)), d_out, d_in, kind=None)

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "N": self.N, "labels": list(self.labels),
                "operator": operator_to_dict(self.R)}

    @classmethod
    def from_dict(cls, data: dict) -> "QuantumComb":
        try:
            comb = cls(operator_from_dict(data["operator"]), tuple(data["dims"]), data.get("labels"))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed comb record: {exc}") from exc
        if "N" in data and int(data["N"]) != comb.N:
            raise ValueError("tooth count does not match the wire list")
        return comb


@dataclass
class CombDiagnostics:
    """``residuals[k-1]`` is ``|| Tr_{2k-1} R^(k) - R^(k-1) (x) I ||`` for ``k = 1..N``;
    ``final_residual`` is ``|R^(0) - 1|``."""

    residuals: list
    final_residual: float
    positive: bool
    tol: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.positive and self.final_residual <= self.tol
                           and all(r <= self.tol for r in self.residuals))


def validate_comb(R, dims=None, N: int | None = None, tol: float = CHECK_TOL) -> CombDiagnostics:
    """Check the recursive normalization of a deterministic comb."""
    if isinstance(R, QuantumComb):
        dims = R.dims if dims is None else dims
        R = R.R
    dims = tuple(int(d) for d in dims)
    N = len(dims) // 2 if N is None else N
    if len(dims) != 2 * N:
        raise ValueError(f"{len(dims)} wires do not describe a comb with {N} teeth")
    R = np.asarray(R, dtype=complex)
    SubsystemShape(dims).check(R)
    positive = is_psd(R, tol)
    residuals = [0.0] * N
    Rk = R
    for k in range(N, 0, -1):
        sub = dims[:2 * k]
        A = partial_trace(Rk, sub, [2 * k - 1])
        d_in = sub[2 * k - 2]
        if k > 1:
            Rprev = partial_trace(A, sub[:-1], [2 * k - 2]) / d_in
        else:
            Rprev = np.array([[np.trace(A) / d_in]])
        residuals[k - 1] = float(np.linalg.norm(A - np.kron(Rprev, np.eye(d_in)), 2))
        Rk = Rprev
    final = float(abs(Rk[0, 0] - 1))
    return CombDiagnostics(residuals, final, positive, tol)


def comb_link(C1: QuantumComb, C2: QuantumComb, connected=None) -> QuantumComb:
    """Link two combs over their shared wires; free wires are re-sorted by label."""
    R, shape = link_product(C1.R, C1.shape, C2.R, C2.shape, connected)
    if shape.labels == (-1,):
        raise ValueError("linking closed every wire; the result is a number, not a comb")
    labels = sorted(shape.labels)
    R = reorder_to(R, shape, labels)
    return QuantumComb(R, tuple(shape.dim_of(l) for l in labels), tuple(labels))


# ---------------------------------------------------------------------------
# testers

@dataclass(frozen=True)
class Tester:
    """Elements ``Pi_i`` on ``H_out (x) H_in`` with ``sum_i Pi_i = I_out (x) sigma``."""

    elements: np.ndarray
    sigma: np.ndarray
    d_out: int
    tol: float = 1e-9

    def __post_init__(self):
        E = elements_of(self.elements)
        sigma = np.asarray(self.sigma, dtype=complex)
        d_in = sigma.shape[0]
        if E.shape[1] != self.d_out * d_in:
            raise ValueError("tester elements do not act on H_out (x) H_in")
        if not is_psd(sigma, self.tol) or abs(np.trace(sigma) - 1) > self.tol:
            raise ValueError("sigma must be a density operator")
        for e in E:
            if not is_psd(e, self.tol):
                raise ValueError("tester elements must be positive semidefinite")
        if not np.allclose(E.sum(axis=0), np.kron(np.eye(self.d_out), sigma), atol=self.tol, rtol=0):
            raise ValueError("tester elements do not sum to I (x) sigma")
        object.__setattr__(self, "elements", E)
        object.__setattr__(self, "sigma", sigma)

    @property
    def d_in(self) -> int:
        return self.sigma.shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    @classmethod
    def from_state_and_povm(cls, rho: np.ndarray, M) -> "Tester":
        """``Pi_i = M_i (x) rho^T``: prepare ``rho``, apply the channel, measure ``M``."""
        ME = elements_of(M)
        rho = np.asarray(rho, dtype=complex)
        return cls(np.array([np.kron(m, rho.T) for m in ME]), rho.T, ME.shape[1])

    def to_dict(self) -> dict:
        return {"d_out": self.d_out, "elements": [operator_to_dict(e) for e in self.elements],
                "sigma": operator_to_dict(self.sigma)}

    @classmethod
    def from_dict(cls, data: dict) -> "Tester":
        try:
            return cls(np.array([operator_from_dict(e) for e in data["elements"]]),
                       operator_from_dict(data["sigma"]), int(data["d_out"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed tester record: {exc}") from exc


def tester_probabilities(T: Tester, R) -> np.ndarray:
    R = R.R if isinstance(R, ChoiOperator) else np.asarray(R)
    if R.shape != T.elements.shape[1:]:
        raise ValueError(f"Choi operator of shape {R.shape} does not match the tester")
    return np.einsum("kij,ji->k", T.elements, R).real


@dataclass(frozen=True)
class TesterRealization:
    """Probe ``|sqrt(sigma^T)>>`` on ``H_in (x) H_anc`` followed by the POVM
    ``P_i = Pi^{-1/2} Pi_i Pi^{-1/2}`` on ``H_out (x) H_anc``.

    The ``P_i`` resolve the projector onto the support of ``Pi``; outcomes
    from its complement never occur.
    """

    probe: np.ndarray
    povm: np.ndarray
    d_out: int
    d_in: int

    @property
    def probe_state(self) -> np.ndarray:
        return np.outer(self.probe, self.probe.conj())

    @property
    def support_projector(self) -> np.ndarray:
        return self.povm.sum(axis=0)

    def probabilities(self, R) -> np.ndarray:
        """Outcome probabilities of running the scheme on the channel ``R``."""
        R = R.R if isinstance(R, ChoiOperator) else np.asarray(R)
        out, _ = link_product(R, SubsystemShape((self.d_out, self.d_in), (2, 0)),
                              self.probe_state, SubsystemShape((self.d_in, self.d_in), (0, 1)))
        return np.einsum("kij,ji->k", self.povm, out).real


def realize_tester(T: Tester, rtol: float = 1e-10) -> TesterRealization:
    probe = vec(psd_power(T.sigma.T, 0.5, rtol))
    Pi = T.elements.sum(axis=0)
    S = psd_power(hermitian_part(Pi), -0.5, rtol)
    P = np.einsum("ij,kjl,lm->kim", S, T.elements, S)
    return TesterRealization(probe, P, T.d_out, T.d_in)


@dataclass
class ExpansionCheck:
    coefficients: np.ndarray
    residual: float
    complete: bool


def tester_dual_expand(T, duals=None, A: np.ndarray | None = None, tol: float = 1e-9) -> ExpansionCheck:
    """Expand ``A`` as ``sum_l <<Delta_l|A>> Pi_l``.

    ``duals`` defaults to the canonical dual (pseudo-inverse on the span for
    a non-IC tester).  A set that does not act as a dual even on the span of
    the tester raises ``ValueError``; ``complete`` reports whether it is a
    dual of the full operator space.
    """
    PE = elements_of(T)
    D = PE.shape[1]
    if A is None:
        raise ValueError("an operator to expand is required")
    if duals is None:
        duals = canonical_dual(PE, allow_singular=True)
    DE = elements_of(duals)
    if DE.shape != PE.shape:
        raise ValueError("dual set and tester have different shapes")
    L, G = synthesis_matrix(PE), synthesis_matrix(DE)
    M = L @ G.conj().T
    if np.linalg.norm(M @ L - L, 2) > tol * max(1.0, np.linalg.norm(L, 2)):
        raise ValueError("the supplied set is not a dual of the tester")
    complete = bool(np.linalg.norm(M - np.eye(D * D), 2) <= tol)
    c = G.conj().T @ vec(A)
    rec = (L @ c).reshape(D, D)
    return ExpansionCheck(c, float(np.linalg.norm(rec - A)), complete)


def save_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj.to_dict()))


def load_comb(path) -> QuantumComb:
    return QuantumComb.from_dict(json.loads(Path(path).read_text()))


def load_tester(path) -> Tester:
    return Tester.from_dict(json.loads(Path(path).read_text()))
