"""Data processing for informationally complete measurements.

Unbiased averaging estimates ``<X>`` by ``sum_l nu_l f_l[X]`` with
coefficients taken from a dual frame.  The per-shot statistical error of a
coefficient choice, averaged over a prior ensemble, is

    delta(X) = sum_l |f_l[X]|^2 p(l|rho_E) - mean_k |Tr[rho_k X]|^2 .

:func:`optimal_dual` returns the coefficients minimizing it for every
``X`` at once; :func:`min_error_closed_form` gives the attained minimum.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import rel_entr

from .frames import DualFrame, elements_of, synthesis_matrix
from .linalg import CHECK_TOL, PAULIS, hermitian_part, is_psd, moore_penrose, realign, vec

logger = logging.getLogger(__name__)

PINV_RTOL = 1e-10
# likelihood changes below this are floating-point noise
LOGLIK_ROUNDOFF = 1e-14


# ---------------------------------------------------------------------------
# ensembles

@dataclass(frozen=True)
class Ensemble:
    """Prior over states (or Choi operators) ``{(rho_k, p_k)}``.

    ``norm`` is the common trace of the members: 1 for states, ``d_in`` for
    Choi operators of channels.
    """

    states: np.ndarray | None
    priors: np.ndarray | None
    norm: float = 1.0
    _haar_dim: int | None = None

    def __post_init__(self):
        if self._haar_dim is not None:
            return
        S = np.asarray(self.states, dtype=complex)
        if S.ndim == 2:
            S = S[None]
        p = np.ones(len(S)) / len(S) if self.priors is None else np.asarray(self.priors, dtype=float)
        if p.shape != (len(S),):
            raise ValueError("one prior per state is required")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("priors must be nonnegative and sum to one")
        for rho in S:
            if not is_psd(rho) or abs(np.trace(rho).real - self.norm) > CHECK_TOL:
                raise ValueError(f"ensemble member is not positive with trace {self.norm}")
        object.__setattr__(self, "states", S)
        object.__setattr__(self, "priors", p)

    @classmethod
    def haar_pure(cls, d: int) -> "Ensemble":
        """Pure states drawn uniformly (unitarily invariant); moments are analytic."""
        return cls(None, None, 1.0, d)

    @classmethod
    def single(cls, rho: np.ndarray, norm: float | None = None) -> "Ensemble":
        rho = np.asarray(rho, dtype=complex)
        return cls(rho[None], np.ones(1), float(np.trace(rho).real) if norm is None else norm)

    @property
    def dim(self) -> int:
        return self._haar_dim if self._haar_dim is not None else self.states.shape[1]

    @property
    def average(self) -> np.ndarray:
        if self._haar_dim is not None:
            return np.eye(self._haar_dim, dtype=complex) / self._haar_dim
        return np.einsum("k,kij->ij", self.priors, self.states)

    def second_moment(self, X: np.ndarray) -> float:
        """``mean_k |Tr[rho_k X]|^2``."""
        X = np.asarray(X)
        if self._haar_dim is not None:
            d = self._haar_dim
            return float((abs(np.trace(X)) ** 2 + np.vdot(X, X).real) / (d * (d + 1)))
        vals = np.einsum("kij,ji->k", self.states, X)
        return float(np.dot(self.priors, np.abs(vals) ** 2))


def _ensemble_average(E, d: int) -> np.ndarray:
    if E is None:
        return np.eye(d, dtype=complex) / d
    if isinstance(E, Ensemble):
        return E.average
    return np.asarray(E, dtype=complex)


def _second_moment(E, X) -> float:
    if E is None:
        return Ensemble.haar_pure(X.shape[0]).second_moment(X)
    if isinstance(E, Ensemble):
        return E.second_moment(X)
    return float(abs(np.trace(np.asarray(E) @ X)) ** 2)


# ---------------------------------------------------------------------------
# coefficients and estimates

@dataclass(frozen=True)
class Coefficients:
    values: np.ndarray
    observable: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.values)

    def residual(self, P) -> float:
        """``|| sum_l f_l P_l - X ||``; zero for an unbiased choice."""
        if self.observable is None:
            raise ValueError("coefficients carry no observable")
        rec = np.einsum("l,lij->ij", self.values, elements_of(P))
        return float(np.linalg.norm(rec - self.observable))


def probabilities(P, rho: np.ndarray, check: bool = True) -> np.ndarray:
    """Born probabilities ``Tr[rho P_l]``."""
    rho = np.asarray(rho, dtype=complex)
    E = elements_of(P)
    if rho.shape != E.shape[1:]:
        raise ValueError(f"state shape {rho.shape} does not match elements {E.shape[1:]}")
    if check and (not is_psd(rho) or abs(np.trace(rho) - 1) > CHECK_TOL):
        raise ValueError("not a density operator")
    return np.einsum("ij,lji->l", rho, E).real


def coefficients_from_dual(Q, X: np.ndarray) -> Coefficients:
    Q = Q if isinstance(Q, DualFrame) else DualFrame(elements_of(Q))
    X = np.asarray(X, dtype=complex)
    return Coefficients(Q.coefficients(X), X)


def qubit_estimator(X: np.ndarray) -> Coefficients:
    """``f_{i+-}[X] = (+-3 Tr[X s_i] + Tr[X]) / 2`` in the Pauli-POVM outcome order."""
    X = np.asarray(X, dtype=complex)
    if X.shape != (2, 2):
        raise ValueError("qubit estimator needs a 2x2 operator")
    t = np.trace(X)
    vals = []
    for s in PAULIS:
        a = np.trace(X @ s)
        vals += [(3 * a + t) / 2, (-3 * a + t) / 2]
    return Coefficients(np.array(vals), X)


def estimate(f, counts) -> complex:
    """``sum_l (n_l / N) f_l``."""
    values = f.values if isinstance(f, Coefficients) else np.asarray(f)
    n = np.asarray(counts, dtype=float)
    if n.shape != values.shape:
        raise ValueError(f"{n.size} counts for {values.size} coefficients")
    N = n.sum()
    if N <= 0:
        raise ValueError("no counts")
    return complex(np.dot(n, values) / N)


def statistical_error(f, P, E, X: np.ndarray | None = None, shots: int | None = None) -> float:
    """Prior-averaged error ``sum_l |f_l|^2 p(l|rho_E) - m2(X)``.

    This is the single-shot value; pass ``shots`` to get the mean squared
    error of an ``N``-shot estimate (the same quantity divided by ``N``).
    """
    values = f.values if isinstance(f, Coefficients) else np.asarray(f)
    if X is None:
        if not isinstance(f, Coefficients) or f.observable is None:
            raise ValueError("observable required")
        X = f.observable
    X = np.asarray(X, dtype=complex)
    pE = probabilities(P, _ensemble_average(E, X.shape[0]), check=False)
    val = float(np.dot(np.abs(values) ** 2, pE)) - _second_moment(E, X)
    return val / shots if shots else val


# ---------------------------------------------------------------------------
# optimal processing

def optimal_dual(P, E=None, require_ic: bool = True) -> DualFrame:
    """Minimum-norm generalized inverse for the weights ``pi_l = p(l|rho_E)``.

    ``Gamma = L+ - [(I - M) pi (I - M)]+ pi M L+`` with ``M = L+ L`` and ``L+``
    the Moore-Penrose inverse of the synthesis map.  Zero-probability outcomes
    need no special handling here: their coefficients are whatever the
    pseudo-inverse assigns, at no cost to the weighted norm.
    """
    Elm = elements_of(P)
    d = Elm.shape[1]
    L = synthesis_matrix(Elm)
    if require_ic and np.linalg.matrix_rank(L, tol=1e-9 * np.linalg.norm(L, 2)) < d * d:
        raise np.linalg.LinAlgError("POVM is not informationally complete")
    pi = np.diag(probabilities(Elm, _ensemble_average(E, d), check=False))
    Lp = moore_penrose(L, PINV_RTOL)
    n = L.shape[1]
    M = Lp @ L
    comp = np.eye(n) - M
    # the rank cut is relative to the weights: when the null space is empty
    # ``comp`` is pure roundoff and must invert to zero
    w, V = np.linalg.eigh(hermitian_part(comp @ pi @ comp))
    keep = w > PINV_RTOL * max(pi.max(), 1e-300)
    W_pinv = (V[:, keep] / w[keep]) @ V[:, keep].conj().T
    gamma = Lp - W_pinv @ pi @ M @ Lp
    return DualFrame(gamma.conj().reshape(n, d, d))


def y_operator(P, rho_E: np.ndarray, keep: np.ndarray | None = None) -> np.ndarray:
    """``Y = sum_j |P_j>><<P_j| / Tr[rho_E P_j]`` over the outcomes in ``keep``."""
    Elm = elements_of(P)
    p = probabilities(Elm, rho_E, check=False)
    keep = p > 0 if keep is None else keep
    L = synthesis_matrix(Elm)[:, keep]
    return (L / p[keep]) @ L.conj().T


def min_error_closed_form(P, E, X: np.ndarray, prune_tol: float = 1e-12) -> float:
    """Minimal ``delta(X)`` as ``<<X|Y^-1|X>> - m2(X)``.

    Outcomes with ``p(l|rho_E) <= prune_tol`` are removed from ``Y``.  Their
    coefficients are free (they never fire under the prior), so the minimum
    is taken over shifting ``X`` along their span as well.
    """
    X = np.asarray(X, dtype=complex)
    Elm = elements_of(P)
    rho_E = _ensemble_average(E, X.shape[0])
    p = probabilities(Elm, rho_E, check=False)
    keep = p > prune_tol * max(p.max(), 1.0)
    Y = y_operator(Elm, rho_E, keep)
    Yp = moore_penrose(Y, PINV_RTOL)
    x = vec(X)
    val = np.vdot(x, Yp @ x).real
    if not np.all(keep):
        Z = synthesis_matrix(Elm)[:, ~keep]
        b = Z.conj().T @ Yp @ x
        val -= np.vdot(b, moore_penrose(Z.conj().T @ Yp @ Z, PINV_RTOL) @ b).real
    return float(val) - _second_moment(E, X)


# ---------------------------------------------------------------------------
# known noise

def superoperator(choi: np.ndarray, d_out: int, d_in: int) -> np.ndarray:
    """Matrix ``S`` with ``vec(C(X)) = S vec(X)`` for a Choi operator ordered out (x) in."""
    return realign(choi, d_out, d_in)


def unbias_noise(Q, noise_choi: np.ndarray, picture: str = "heisenberg", cond_max: float = 1e12) -> DualFrame:
    """Dual for the noisy POVM ``{N(P_l)}`` where ``N`` is the Heisenberg-picture noise.

    The new coefficients are ``f_l[N^{-1}(X)]``, i.e. the elements become
    ``(N^{-1})^dag (Q_l)``.  ``picture`` states which picture ``noise_choi``
    is given in; a Schroedinger-picture map is converted by adjunction.
    """
    QE = elements_of(Q)
    d = QE.shape[1]
    S = superoperator(noise_choi, d, d)
    if picture == "schrodinger":
        S = S.conj().T
    elif picture != "heisenberg":
        raise ValueError(f"unknown picture {picture!r}")
    if np.linalg.cond(S) > cond_max:
        raise np.linalg.LinAlgError("noise map is not invertible")
    Sinv_dag = np.linalg.inv(S).conj().T
    n = QE.shape[0]
    cols = Sinv_dag @ QE.reshape(n, -1).T
    return DualFrame(cols.T.reshape(n, d, d))


def heisenberg_map(noise_choi: np.ndarray, P, picture: str = "heisenberg") -> np.ndarray:
    """Apply the Heisenberg-picture noise to every element: ``{N(P_l)}``."""
    E = elements_of(P)
    d = E.shape[1]
    S = superoperator(noise_choi, d, d)
    if picture == "schrodinger":
        S = S.conj().T
    return (S @ E.reshape(len(E), -1).T).T.reshape(E.shape)


# ---------------------------------------------------------------------------
# maximum likelihood

def log_likelihood(P, counts, rho: np.ndarray) -> float:
    """``(1/N) sum_l n_l log p(l|rho)``; outcomes with ``n_l = 0`` are skipped."""
    n = np.asarray(counts, dtype=float)
    nu = n / n.sum()
    p = probabilities(P, rho, check=False)
    mask = nu > 0
    if np.any(p[mask] <= 0):
        return -np.inf
    return float(np.dot(nu[mask], np.log(p[mask])))


def kl_divergence(nu, p) -> float:
    """``D(nu || p) = sum_l nu_l log(nu_l / p_l)``."""
    nu = np.asarray(nu, dtype=float)
    p = np.asarray(p, dtype=float)
    if nu.shape != p.shape:
        raise ValueError("distributions have different lengths")
    if np.any((nu > 0) & (p <= 0)):
        raise ValueError("p must be positive wherever nu is")
    return float(np.sum(rel_entr(nu, p)))


@dataclass
class MaxLikResult:
    rho: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    stationarity: float
    history: list[float] = field(default_factory=list)


def max_likelihood(P, counts, init: np.ndarray | None = None, max_iters: int = 20000,
                   tol: float = 1e-10, step: float = 1.0) -> MaxLikResult:
    """Maximize the log-likelihood over density operators.

    Iterates the diluted map ``rho <- G rho G / Tr`` with
    ``G = (I + eps R) / (1 + eps)`` and ``R = sum_l (nu_l / p_l) P_l``.  The
    fixed points are the stationary points of the likelihood.  A step that
    would lower the likelihood is rejected and ``eps`` halved, so the
    recorded sequence is non-decreasing up to ``LOGLIK_ROUNDOFF``.  Convergence is declared when
    ``||R rho - rho||_1 < tol``.
    """
    Elm = elements_of(P)
    d = Elm.shape[1]
    n = np.asarray(counts, dtype=float)
    if n.shape != (Elm.shape[0],):
        raise ValueError("one count per POVM outcome is required")
    nu = n / n.sum()
    mask = nu > 0
    rho = np.eye(d, dtype=complex) / d if init is None else np.asarray(init, dtype=complex)
    if not is_psd(rho) or abs(np.trace(rho) - 1) > CHECK_TOL:
        raise ValueError("initial point must be a density operator")
    I = np.eye(d)

    def r_op(r):
        p = np.einsum("ij,lji->l", r, Elm).real
        w = np.zeros_like(p)
        w[mask] = nu[mask] / p[mask]
        return np.einsum("l,lij->ij", w, Elm)

    L = log_likelihood(Elm, n, rho)
    history = [L]
    eps = step
    stat = np.inf
    for it in range(1, max_iters + 1):
        R = r_op(rho)
        stat = float(np.sum(np.linalg.svd(R @ rho - rho, compute_uv=False)))
        if stat < tol:
            return MaxLikResult(rho, L, True, it - 1, stat, history)
        while True:
            G = (I + eps * R) / (1 + eps)
            cand = hermitian_part(G @ rho @ G)
            cand /= np.trace(cand).real
            Lc = log_likelihood(Elm, n, cand)
            if Lc >= L - LOGLIK_ROUNDOFF or eps < 1e-12:
                break
            eps /= 2
        if Lc < L - LOGLIK_ROUNDOFF:
            break
        rho, L = cand, Lc
        history.append(L)
        eps = min(eps * 2, 1e6)
    warnings.warn(f"maximum likelihood stopped without reaching tol={tol:g} (stationarity {stat:.3e})",
                  RuntimeWarning, stacklevel=2)
    return MaxLikResult(rho, L, False, len(history) - 1, stat, history)


# ---------------------------------------------------------------------------
# CSV interfaces

def read_counts_csv(path) -> np.ndarray:
    """Counts from a CSV with columns ``outcome_index,count``."""
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"outcome_index", "count"} <= set(reader.fieldnames):
            raise ValueError("counts CSV needs columns outcome_index,count")
        for row in reader:
            idx, c = int(row["outcome_index"]), int(row["count"])
            if idx < 0 or c < 0:
                raise ValueError("negative index or count")
            rows[idx] = rows.get(idx, 0) + c
    if not rows:
        return np.zeros(0, dtype=int)
    out = np.zeros(max(rows) + 1, dtype=int)
    for k, v in rows.items():
        out[k] = v
    return out


def write_counts_csv(path, counts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["outcome_index", "count"])
        for i, c in enumerate(np.asarray(counts, dtype=int)):
            w.writerow([i, int(c)])


def write_coefficients_csv(path, f) -> None:
    values = f.values if isinstance(f, Coefficients) else np.asarray(f)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["outcome_index", "re", "im"])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v.real)), repr(float(v.imag))])


def read_coefficients_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        data = sorted((int(r["outcome_index"]), float(r["re"]) + 1j * float(r["im"])) for r in reader)
    return np.array([v for _, v in data])
