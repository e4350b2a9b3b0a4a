"""Finite unitary groups used as exact stand-ins for Haar integrals."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .linalg import haar_random_unitary


def shift_clock(d: int) -> tuple[np.ndarray, np.ndarray]:
    w = np.exp(2j * np.pi / d)
    X = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    Z = np.diag(w ** np.arange(d))
    return X, Z


def weyl_operators(d: int) -> np.ndarray:
    """The ``d**2`` unitaries ``X^a Z^b`` (an orthogonal operator basis), shape ``(d*d, d, d)``."""
    X, Z = shift_clock(d)
    ops = [np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b)
           for a in range(d) for b in range(d)]
    return np.array(ops)


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % k for k in range(2, int(n ** 0.5) + 1))


def _phase_key(U: np.ndarray) -> tuple[np.ndarray, bytes]:
    flat = U.reshape(-1)
    k = int(np.argmax(np.abs(flat) > 1e-8))
    V = U * (abs(flat[k]) / flat[k])
    key = np.round(V.reshape(-1), 7) + 0.0
    return V, key.tobytes()


@lru_cache(maxsize=None)
def _clifford(d: int) -> np.ndarray:
    w = np.exp(2j * np.pi / d)
    j = np.arange(d)
    F = np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)
    S = np.diag([1, 1j]) if d == 2 else np.diag(w ** (j * (j - 1) // 2))
    X, _ = shift_clock(d)
    gens = [F, S.astype(complex), X]
    start, key = _phase_key(np.eye(d, dtype=complex))
    seen = {key: start}
    frontier = [start]
    while frontier:
        nxt = []
        for U in frontier:
            for g in gens:
                V, k = _phase_key(g @ U)
                if k not in seen:
                    seen[k] = V
                    nxt.append(V)
        frontier = nxt
    out = np.array(list(seen.values()))
    out.setflags(write=False)
    return out


def clifford_group(d: int) -> np.ndarray:
    """Single-qudit Clifford group modulo phases, for prime ``d``.

    Sizes are 24 (d=2), 216 (d=3), 3000 (d=5).  In prime dimension this set
    is an exact unitary 2-design.
    """
    if not _is_prime(d):
        raise ValueError(f"Clifford design only available for prime dimension, got {d}")
    return _clifford(d)


def frame_potential(unitaries: np.ndarray, t: int = 2) -> float:
    """``mean |Tr[U^dag V]|^(2t)``; equals ``t!`` (for ``d >= t``) exactly on a unitary t-design."""
    U = np.asarray(unitaries)
    tr = np.einsum("aij,bij->ab", U.conj(), U)
    return float(np.mean(np.abs(tr) ** (2 * t)))


def unitary_design(d: int, kind: str = "clifford", samples: int = 0, rng=None) -> np.ndarray:
    """Exact 2-design (``kind="clifford"``) or ``samples`` Haar unitaries (``kind="haar"``)."""
    if kind == "clifford":
        return clifford_group(d)
    if kind == "haar":
        if samples < 1:
            raise ValueError("Haar design needs a positive sample count")
        return haar_random_unitary(d, rng, size=samples)
    raise ValueError(f"unknown design kind {kind!r}")
