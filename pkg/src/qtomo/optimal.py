"""Covariant testers and their figure of merit.

Operators on ``L(H_out (x) H_in)`` are vectorized row-major, so the doubled
space carries tensor factors ``(out, in, out', in')``.  With
``Omega = |I>><<I| / d`` on a pair of copies, the group ``U (x) V`` acting
on both copies splits the doubled space into

    P1 = Omega_out (x) Omega_in           rank 1
    P2 = (I - Omega_out) (x) Omega_in     rank d_out^2 - 1
    P3 = Omega_out (x) (I - Omega_in)     rank d_in^2 - 1
    P4 = (I - Omega_out) (x) (I - Omega_in)

and every invariant operator is ``c1 P1 + A P2 + B P3 + C P4``.

The tester second moment is normalized so that the ``P1`` coefficient is
one: ``Y = avg_{g,h} sum_i |Pi_igh>><<Pi_igh| * d_in / Tr[Pi_i]``.  For
channels (``d_in = d_out = d``) this is the prior ``R_E = I (x) I / d``.

``eta = Tr[Y^+ G]`` with ``G`` the projector onto the operator subspace of
interest (all operations, channels, unital channels, states, POVMs).
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .combs import Tester
from .designs import unitary_design, weyl_operators
from .linalg import haar_random_unitary, moore_penrose, psd_sqrt, vec

SUPPORT_TOL = 1e-9


class SubspaceKind(str, enum.Enum):
    QOPS = "qops"
    CHANNELS = "channels"
    UNITAL = "unital"
    STATES = "states"
    POVMS = "povms"


# which Schur blocks make up the projector Q_V of each subspace
_BLOCKS = {
    SubspaceKind.QOPS: (1, 1, 1, 1),
    SubspaceKind.CHANNELS: (1, 1, 0, 1),
    SubspaceKind.UNITAL: (1, 0, 0, 1),
    SubspaceKind.STATES: (1, 1, 0, 0),
    SubspaceKind.POVMS: (1, 0, 1, 0),
}


def _kind(kind) -> SubspaceKind:
    return kind if isinstance(kind, SubspaceKind) else SubspaceKind(kind)


def kind_dims(kind, d: int) -> tuple[int, int]:
    """``(d_out, d_in)`` of the Choi space for a subspace kind."""
    kind = _kind(kind)
    if kind is SubspaceKind.STATES:
        return d, 1
    if kind is SubspaceKind.POVMS:
        return 1, d
    return d, d


# ---------------------------------------------------------------------------
# Schur projectors

def _omega(d: int) -> np.ndarray:
    v = vec(np.eye(d, dtype=complex))
    return np.outer(v, v) / d


def _pair_to_doubled(Xo: np.ndarray, Xi: np.ndarray, d_out: int, d_in: int) -> np.ndarray:
    """``Xo`` on (out, out'), ``Xi`` on (in, in') -> operator on (out, in, out', in')."""
    T = np.einsum("acbd,ikjl->aickbjdl",
                  Xo.reshape(d_out, d_out, d_out, d_out), Xi.reshape(d_in, d_in, d_in, d_in))
    D = (d_out * d_in) ** 2
    return T.reshape(D, D)


def schur_projectors(d_out: int, d_in: int | None = None) -> np.ndarray:
    """Stack ``(P1, P2, P3, P4)`` on the doubled space."""
    d_in = d_out if d_in is None else d_in
    Wo, Wi = _omega(d_out), _omega(d_in)
    Io, Ii = np.eye(d_out ** 2), np.eye(d_in ** 2)
    return np.array([_pair_to_doubled(Wo, Wi, d_out, d_in),
                     _pair_to_doubled(Io - Wo, Wi, d_out, d_in),
                     _pair_to_doubled(Wo, Ii - Wi, d_out, d_in),
                     _pair_to_doubled(Io - Wo, Ii - Wi, d_out, d_in)])


def schur_ranks(d_out: int, d_in: int | None = None) -> np.ndarray:
    d_in = d_out if d_in is None else d_in
    a, b = d_out ** 2 - 1, d_in ** 2 - 1
    return np.array([1, a, b, a * b])


def subspace_projector(kind, d: int) -> np.ndarray:
    d_out, d_in = kind_dims(kind, d)
    g = np.array(_BLOCKS[_kind(kind)], dtype=float)
    return np.einsum("k,kij->ij", g, schur_projectors(d_out, d_in))


@dataclass(frozen=True)
class SchurCoefficients:
    """``Y = P1 + A P2 + B P3 + C P4``.

    Coefficients of blocks with rank zero (e.g. ``B`` and ``C`` for states)
    are stored as 0 and never used.
    """

    A: float
    B: float
    C: float
    d_out: int
    d_in: int
    tol: float = 1e-9

    def __post_init__(self):
        for name in ("A", "B", "C"):
            if getattr(self, name) < -self.tol:
                raise ValueError(f"Schur coefficient {name} = {getattr(self, name)} is negative")
        if self.d_out == self.d_in and self.A > 1 / (self.d_out + 1) + self.tol:
            raise ValueError(f"A = {self.A} exceeds 1/(d+1), impossible for rank-one seeds")

    @property
    def d(self) -> int:
        if self.d_out != self.d_in:
            raise ValueError("rectangular coefficients have no single dimension")
        return self.d_out

    @property
    def values(self) -> np.ndarray:
        return np.array([1.0, self.A, self.B, self.C])

    def operator(self) -> np.ndarray:
        return np.einsum("k,kij->ij", self.values, schur_projectors(self.d_out, self.d_in))


def schur_decompose(Y: np.ndarray, d_out: int, d_in: int | None = None) -> tuple[np.ndarray, float]:
    """Block averages ``Tr[P_k Y] / rank_k`` and the Frobenius residual of the fit."""
    d_in = d_out if d_in is None else d_in
    P = schur_projectors(d_out, d_in)
    r = schur_ranks(d_out, d_in)
    tr = np.einsum("kij,ji->k", P, Y).real
    c = np.where(r > 0, tr / np.maximum(r, 1), 0.0)
    fit = np.einsum("k,kij->ij", c, P)
    return c, float(np.linalg.norm(Y - fit))


# ---------------------------------------------------------------------------
# figure of merit

@dataclass(frozen=True)
class WeightedObservables:
    observables: np.ndarray
    weights: np.ndarray

    @property
    def G(self) -> np.ndarray:
        V = np.asarray(self.observables).reshape(len(self.observables), -1)
        return (V.T * np.asarray(self.weights)) @ V.conj()


def symmetric_G(g, d_out: int, d_in: int | None = None) -> np.ndarray:
    d_in = d_out if d_in is None else d_in
    return np.einsum("k,kij->ij", np.asarray(g, dtype=float), schur_projectors(d_out, d_in))


def eta(Y: np.ndarray, G) -> float:
    """``Tr[Y^+ G]``; ``+inf`` when ``G`` reaches outside the range of ``Y``."""
    G = G.G if isinstance(G, WeightedObservables) else np.asarray(G)
    Yp = moore_penrose(Y, 1e-10)
    outside = G - (Y @ Yp) @ G
    if np.linalg.norm(outside) > SUPPORT_TOL * max(1.0, np.linalg.norm(G)):
        return math.inf
    return float(np.trace(Yp @ G).real)


def eta_schur(coeffs: SchurCoefficients, g) -> float:
    """``sum_k g_k rank_k / c_k`` for ``G = sum_k g_k P_k``."""
    r = schur_ranks(coeffs.d_out, coeffs.d_in)
    total = 0.0
    for gk, rk, ck in zip(g, r, coeffs.values):
        if gk == 0 or rk == 0:
            continue
        if ck <= 0:
            return math.inf
        total += gk * rk / ck
    return float(total)


def eta_subspace(A: float, d: int, kind) -> float:
    """Figure of merit of the symmetric single-seed family (``B = A``,
    ``C = (1 - 2A)/(d^2 - 1)``) for quantum operations, channels or unital
    channels.  ``A = 0`` gives ``+inf`` for the first two."""
    kind = _kind(kind)
    if kind not in (SubspaceKind.QOPS, SubspaceKind.CHANNELS, SubspaceKind.UNITAL):
        raise ValueError(f"eta_subspace covers operations/channels/unital, not {kind.value}")
    if not 0 <= A < 0.5:
        raise ValueError(f"A = {A} outside [0, 1/2)")
    D = d * d - 1
    quad = D ** 2 / (1 - 2 * A)
    if kind is SubspaceKind.UNITAL:
        return 1 + D * quad
    if A == 0:
        return math.inf
    n_inv = 2 if kind is SubspaceKind.QOPS else 1
    return 1 + D * (n_inv / A + quad)


def optimal_A(kind, d: int) -> float:
    kind = _kind(kind)
    if d < 2:
        raise ValueError("d must be at least 2")
    if kind is SubspaceKind.QOPS:
        return 1 / (d * d + 1)
    if kind is SubspaceKind.CHANNELS:
        return 1 / (math.sqrt(2) * (d * d - 1) + 2)
    if kind is SubspaceKind.UNITAL:
        return 0.0
    raise ValueError(f"no A optimum for {kind.value}; see special_case_eta")


def optimal_eta_bound(kind, d: int) -> float:
    kind = _kind(kind)
    s2 = math.sqrt(2)
    if kind is SubspaceKind.QOPS:
        return float(d ** 6 + d ** 4 - d ** 2)
    if kind is SubspaceKind.CHANNELS:
        return d ** 6 + (2 * s2 - 3) * d ** 4 + (5 - 4 * s2) * d ** 2 + 2 * (s2 - 1)
    if kind is SubspaceKind.UNITAL:
        return float((d * d - 1) ** 3 + 1)
    return special_case_eta(kind, d)


def special_case_eta(kind, d: int) -> float:
    """Optimal figure of merit for states or POVMs: ``d^3 + d^2 - d``.

    This is the value in the normalization where the ``P1`` coefficient of
    ``Y`` is one; a prior ``rho_E = I/d`` in the processing module gives the
    same number divided by ``d``.
    """
    kind = _kind(kind)
    if kind not in (SubspaceKind.STATES, SubspaceKind.POVMS):
        raise ValueError("special cases are states and povms")
    if d < 2:
        raise ValueError("d must be at least 2")
    return float(d ** 3 + d ** 2 - d)


# ---------------------------------------------------------------------------
# seeds

@dataclass(frozen=True)
class OptimalSeed:
    """``Psi = [(1 - beta) I / d + beta |psi><psi|]^{1/2}``."""

    Psi: np.ndarray
    beta: float
    psi: np.ndarray

    @property
    def d(self) -> int:
        return self.Psi.shape[0]

    @property
    def purity(self) -> float:
        M = self.Psi @ self.Psi.conj().T
        return float(np.trace(M @ M).real)

    @property
    def element(self) -> np.ndarray:
        """Seed tester element ``d |Psi>><<Psi|``."""
        v = vec(self.Psi)
        return self.d * np.outer(v, v.conj())


def optimal_beta(kind, d: int) -> float:
    kind = _kind(kind)
    if kind is SubspaceKind.QOPS:
        return math.sqrt((d + 1) / (d * d + 1))
    if kind is SubspaceKind.CHANNELS:
        return math.sqrt((d + 1) / (2 + math.sqrt(2) * (d * d - 1)))
    if kind is SubspaceKind.UNITAL:
        return 0.0
    raise ValueError(f"no seed family for {kind.value}")


def target_purity(kind, d: int) -> float:
    kind = _kind(kind)
    s = math.sqrt(2) * (d * d - 1)
    if kind is SubspaceKind.QOPS:
        return 2 * d / (d * d + 1)
    if kind is SubspaceKind.CHANNELS:
        return (s + 1 + d * d) / (d * (s + 2))
    if kind is SubspaceKind.UNITAL:
        return 1 / d
    raise ValueError(f"no seed family for {kind.value}")


def seed_from_beta(beta: float, d: int, psi: np.ndarray | None = None) -> OptimalSeed:
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    psi = np.eye(d, dtype=complex)[0] if psi is None else np.asarray(psi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise ValueError("fiducial state must be normalized")
    M = (1 - beta) * np.eye(d) / d + beta * np.outer(psi, psi.conj())
    return OptimalSeed(psd_sqrt(M), float(beta), psi)


def optimal_seed(kind, d: int, psi: np.ndarray | None = None) -> OptimalSeed:
    return seed_from_beta(optimal_beta(kind, d), d, psi)


def covariant_Y_from_seeds(seeds, d_out: int | None = None, d_in: int | None = None,
                           tol: float = 1e-10) -> SchurCoefficients:
    """Schur coefficients of the twirled second moment of rank-one seeds.

    ``seeds`` is a list of ``(alpha_i, Psi_i)`` with ``Psi_i`` of shape
    ``(d_out, d_in)``, ``Tr[Psi Psi^dag] = 1`` and ``sum alpha_i = d_out``.
    A single :class:`OptimalSeed` is accepted as shorthand for ``[(d, Psi)]``.
    """
    if isinstance(seeds, OptimalSeed):
        seeds = [(seeds.d, seeds.Psi)]
    seeds = [(float(a), np.atleast_2d(np.asarray(P, dtype=complex))) for a, P in seeds]
    d_out = seeds[0][1].shape[0] if d_out is None else d_out
    d_in = seeds[0][1].shape[1] if d_in is None else d_in
    alphas = np.array([a for a, _ in seeds])
    if np.any(alphas <= 0) or abs(alphas.sum() - d_out) > tol:
        raise ValueError(f"seed weights must be positive and sum to {d_out}")
    t1 = t_in = t_out = t_all = 0.0
    for a, Psi in seeds:
        if Psi.shape != (d_out, d_in):
            raise ValueError("seed shape inconsistent with (d_out, d_in)")
        if abs(np.vdot(Psi, Psi).real - 1) > tol:
            raise ValueError("each seed must satisfy Tr[Psi Psi^dag] = 1")
        # Pi = a |Psi>><<Psi|; weight d_in / Tr[Pi] = d_in / a
        c = d_in / a
        Mo = Psi @ Psi.conj().T          # Tr_in |Psi>><<Psi|
        Mi = Psi.T @ Psi.conj()          # Tr_out |Psi>><<Psi|
        t1 += c * a * a / (d_out * d_in)
        t_in += c * a * a * np.trace(Mo @ Mo).real / d_in
        t_out += c * a * a * np.trace(Mi @ Mi).real / d_out
        t_all += c * a * a
    assert abs(t1 - 1) < 1e-9, "P1 coefficient must be one under the seed normalization"
    r = schur_ranks(d_out, d_in)
    A = (t_in - t1) / r[1] if r[1] else 0.0
    B = (t_out - t1) / r[2] if r[2] else 0.0
    C = (t_all - t1 - A * r[1] - B * r[2]) / r[3] if r[3] else 0.0
    if len(seeds) == 1 and d_out == d_in:
        assert abs(A - B) < 1e-9, f"single rank-one seed must give B = A, got {A} vs {B}"
    return SchurCoefficients(float(A), float(B), float(C), d_out, d_in)


# ---------------------------------------------------------------------------
# design twirls

def _design(d: int, design, rng=None) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1, 1), dtype=complex)
    if isinstance(design, str):
        return unitary_design(d, design, rng=rng)
    return np.asarray(design)


def orbit(Pi: np.ndarray, d_out: int, d_in: int, U: np.ndarray, V: np.ndarray, pairs: str = "all") -> np.ndarray:
    """Elements ``(U_g (x) V_h) Pi (U_g (x) V_h)^dag``.

    ``pairs="all"`` takes every ``(g, h)`` (``g`` major); ``"zip"`` pairs
    ``U[k]`` with ``V[k]``.
    """
    T = np.asarray(Pi).reshape(d_out, d_in, d_out, d_in)
    X = np.einsum("gao,oicj,gbc->gaibj", U, T, U.conj(), optimize=True)
    if pairs == "all":
        out = np.einsum("hxi,gaibj,hyj->ghaxby", V, X, V.conj(), optimize=True)
    elif pairs == "zip":
        out = np.einsum("gxi,gaibj,gyj->gaxby", V, X, V.conj(), optimize=True)
    else:
        raise ValueError(f"unknown pairing {pairs!r}")
    D = d_out * d_in
    return out.reshape(-1, D, D)


def _side_twirl(X: np.ndarray, U: np.ndarray, d_out: int, d_in: int, side: str) -> np.ndarray:
    """Sum over ``k`` of ``W_k X W_k^dag`` with ``W = U (x) I (x) U^* (x) I`` on
    the doubled space (``side="out"``) or ``I (x) U (x) I (x) U^*`` (``"in"``)."""
    n = len(U)
    if side == "out":
        A = np.einsum("gab,ij->gaibj", U, np.eye(d_in)).reshape(n, d_out * d_in, d_out * d_in)
    else:
        A = np.einsum("ab,gij->gaibj", np.eye(d_out), U).reshape(n, d_out * d_in, d_out * d_in)
    W = np.einsum("gab,gcd->gacbd", A, A.conj()).reshape(n, X.shape[0], X.shape[0])
    return np.einsum("gab,bc,gdc->ad", W, X, W.conj(), optimize=True)


def haar_twirl(X: np.ndarray, d_out: int, d_in: int, samples: int, rng=None, batch: int = 10000) -> np.ndarray:
    """Monte Carlo estimate of the ``U (x) V`` twirl of ``X`` on the doubled space.

    ``samples`` Haar unitaries are drawn independently for each side and the
    two averages are applied in turn, so every ``(U_g, V_h)`` combination
    contributes.
    """
    rng = np.random.default_rng(rng)
    for side, d in (("out", d_out), ("in", d_in)):
        if d == 1:
            continue
        acc = np.zeros_like(X, dtype=complex)
        done = 0
        while done < samples:
            n = min(batch, samples - done)
            acc += _side_twirl(X, haar_random_unitary(d, rng, size=n), d_out, d_in, side)
            done += n
        X = acc / samples
    return X


def twirled_Y(seeds, d_out: int, d_in: int, design="clifford", samples: int = 0, rng=None) -> np.ndarray:
    """Second moment built by explicit group averaging.

    ``design`` is ``"clifford"`` (exact 2-design, every pair ``(g, h)``),
    ``"haar"`` (Monte Carlo with ``samples`` draws per side, see
    :func:`haar_twirl`) or an explicit unitary stack.
    """
    if isinstance(seeds, OptimalSeed):
        seeds = [(seeds.d, seeds.Psi)]
    D = d_out * d_in
    M = np.zeros((D * D, D * D), dtype=complex)
    for a, Psi in seeds:
        v = vec(a * np.outer(vec(np.asarray(Psi, dtype=complex)), vec(np.asarray(Psi, dtype=complex)).conj()))
        M += (d_in / a) * np.outer(v, v.conj())
    if design == "haar":
        return haar_twirl(M, d_out, d_in, samples, rng)
    Y = np.zeros_like(M)
    for a, Psi in seeds:
        v = vec(np.asarray(Psi, dtype=complex))
        U, V = _design(d_out, design), _design(d_in, design)
        W = orbit(a * np.outer(v, v.conj()), d_out, d_in, U, V, "all").reshape(len(U) * len(V), -1)
        Y += (d_in / a) * (W.T @ W.conj()) / len(W)
    return Y


@dataclass
class IcCheck:
    overlaps: np.ndarray
    min_eigenvalue: float
    informationally_complete: bool


def check_ic_covariant(seed: OptimalSeed, design="clifford", samples: int = 0, rng=None,
                       tol: float = 1e-9) -> IcCheck:
    """Overlaps ``<<Pi_0|P_k|Pi_0>>`` and the smallest eigenvalue of the
    twirled frame operator ``avg |Pi_gh>><<Pi_gh|``."""
    Pi = seed.element
    d = seed.d
    p = vec(Pi)
    P = schur_projectors(d, d)
    overlaps = np.einsum("i,kij,j->k", p.conj(), P, p).real
    # with alpha = d the twirl weight d_in / alpha is one, so this is F itself
    F = twirled_Y([(d, seed.Psi)], d, d, design, samples, rng)
    lam = float(np.linalg.eigvalsh(F)[0])
    return IcCheck(overlaps, lam, bool(np.all(overlaps > tol) and lam > tol))


# ---------------------------------------------------------------------------
# testers

def build_optimal_tester(kind, d: int, seed: OptimalSeed | None = None, design="clifford") -> Tester:
    """Discrete covariant tester ``{Pi_gh / (|G||H|)}`` on ``H_out (x) H_in``
    with normalization ``sigma = I/d``; ``design`` is a finite unitary set
    standing in for the group average."""
    seed = optimal_seed(kind, d) if seed is None else seed
    U = _design(d, design)
    E = orbit(seed.element, d, d, U, U, "all") / (len(U) ** 2)
    return Tester(E, np.eye(d) / d, d)


def tester_Y(T: Tester) -> np.ndarray:
    """``sum_k |Pi_k>><<Pi_k| / Tr[R_E Pi_k]`` with ``R_E = I (x) I / d_in``."""
    V = T.elements.reshape(len(T), -1)
    w = np.einsum("kii->k", T.elements).real / T.d_in
    keep = w > 0
    return (V[keep].T / w[keep]) @ V[keep].conj()


def bell_scheme_povm(Psi: np.ndarray, U: np.ndarray | None = None, V: np.ndarray | None = None) -> np.ndarray:
    """Effective POVM on ``S1 S2`` of the two-Bell-measurement scheme.

    Ancillas ``A1 A2`` are prepared in ``|Psi>>``; ``S1`` is rotated by ``U``
    and ``S2`` by ``V``, then ``S1 A1`` and ``S2 A2`` undergo Bell
    measurements in the basis ``|W_ab>> / sqrt(d)``.  Returns ``d**4``
    rank-one elements indexed ``((a1 b1), (a2 b2))``.
    """
    Psi = np.asarray(Psi, dtype=complex)
    d = Psi.shape[0]
    B = weyl_operators(d) / np.sqrt(d)
    # <m| = (<<B1|_{S1A1} (x) <<B2|_{S2A2}) |Psi>>_{A1A2} as a bra on S1 S2
    bra = np.einsum("kxa,lyb,ab->klxy", B.conj(), B.conj(), Psi)
    n = d ** 4
    bra = bra.reshape(n, d * d)
    E = np.einsum("ki,kj->kij", bra.conj(), bra)
    if U is not None or V is not None:
        U = np.eye(d) if U is None else U
        V = np.eye(d) if V is None else V
        W = np.kron(U, V)
        E = np.einsum("ji,kjl,lm->kim", W.conj(), E, W)
    return E


def results_table(kinds=("qops", "channels", "unital", "states", "povms"), dims=(2, 3, 4, 5)) -> list[dict]:
    """Closed forms against the seed pipeline, one row per ``(kind, d)``."""
    rows = []
    for kind in kinds:
        kind = _kind(kind)
        for d in dims:
            d_out, d_in = kind_dims(kind, d)
            if kind in (SubspaceKind.STATES, SubspaceKind.POVMS):
                psi = np.eye(d, dtype=complex)[0]
                Psi = psi.reshape(d_out, d_in)
                coeffs = covariant_Y_from_seeds([(d_out, Psi)], d_out, d_in)
                A_opt, beta, purity = coeffs.A if d_in == 1 else coeffs.B, 1.0, 1.0
            else:
                seed = optimal_seed(kind, d)
                coeffs = covariant_Y_from_seeds(seed)
                A_opt, beta, purity = optimal_A(kind, d), seed.beta, seed.purity
            bound = optimal_eta_bound(kind, d)
            computed = eta_schur(coeffs, _BLOCKS[kind])
            rows.append({"kind": kind.value, "d": d, "A_opt": A_opt, "beta": beta, "purity": purity,
                         "eta_bound": bound, "eta_computed": computed, "residual": abs(computed - bound)})
    return rows


def write_results_csv(path, rows) -> None:
    fields = ["kind", "d", "A_opt", "beta", "purity", "eta_bound", "eta_computed", "residual"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in fields})
