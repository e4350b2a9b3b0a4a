"""Dense operator algebra used throughout the package.

Operators are plain complex ``numpy`` arrays.  Vectorization is row-major:
``|X>> = sum_mn X[m, n] |m>|n>``, so ``vec(X) == X.reshape(-1)`` and

    (A kron B) |C>> = |A C B^T>>,       Tr_1[|A>><<B|] = A^T B^*.

Multipartite operators carry a :class:`SubsystemShape` listing the factor
dimensions and an integer wire label per factor.  Wires that share a label
are the ones joined by :func:`link_product`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: default tolerance for hermiticity / positivity checks
CHECK_TOL = 1e-9
#: default tolerance for algebraic identities
ALGEBRA_TOL = 1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True)
class SubsystemShape:
    """Ordered factor dimensions of a multipartite operator plus wire labels."""

    dims: tuple[int, ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"invalid subsystem dimensions {self.dims}")
        labels = tuple(range(len(dims))) if self.labels is None else tuple(int(l) for l in self.labels)
        if len(labels) != len(dims):
            raise ValueError("one label per subsystem is required")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate wire labels {labels}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: int) -> int:
        return self.labels.index(label)

    def dim_of(self, label: int) -> int:
        return self.dims[self.index(label)]

    def check(self, X: np.ndarray) -> None:
        if X.shape != (self.total, self.total):
            raise ValueError(f"operator of shape {X.shape} inconsistent with dims {self.dims}")


def _as_shape(shape) -> SubsystemShape:
    return shape if isinstance(shape, SubsystemShape) else SubsystemShape(tuple(shape))


# ---------------------------------------------------------------------------
# vectorization and products

def vec(X: np.ndarray) -> np.ndarray:
    """Row-major double-ket ``|X>>``; ``vec(X)[m * cols + n] == X[m, n]``."""
    return np.asarray(X).reshape(-1)


def unvec(v: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    v = np.asarray(v).reshape(-1)
    if shape is None:
        d = int(round(np.sqrt(v.size)))
        if d * d != v.size:
            raise ValueError("cannot infer a square shape; pass shape")
        shape = (d, d)
    return v.reshape(shape)


def hs_inner(A: np.ndarray, B: np.ndarray) -> complex:
    """Hilbert-Schmidt product ``Tr[A^dag B]``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return complex(np.vdot(A, B))


def tensor(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def ket(index: int, d: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    e[index] = 1
    return e


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def max_entangled(d: int) -> np.ndarray:
    """Unnormalized ``|I>><<I|`` on ``C^d (x) C^d``."""
    v = vec(np.eye(d, dtype=complex))
    return np.outer(v, v.conj())


# ---------------------------------------------------------------------------
# partial operations

def _tensor_form(X: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    return np.asarray(X).reshape(tuple(dims) * 2)


def partial_trace(X: np.ndarray, shape, which: Iterable[int]) -> np.ndarray:
    """Trace out the subsystems at positions ``which``.

    If every subsystem is traced the result is a 1x1 array.
    """
    shape = _as_shape(shape)
    shape.check(np.asarray(X))
    which = sorted(set(int(w) for w in which))
    n = len(shape.dims)
    if not which or any(w < 0 or w >= n for w in which):
        raise ValueError(f"invalid subsystem selection {which} for {n} subsystems")
    rows = list(range(n))
    cols = list(range(n, 2 * n))
    for w in which:
        cols[w] = rows[w]
    keep = [i for i in range(n) if i not in which]
    out_idx = [rows[i] for i in keep] + [cols[i] for i in keep]
    T = np.einsum(_tensor_form(X, shape.dims), rows + cols, out_idx)
    dk = int(np.prod([shape.dims[i] for i in keep])) if keep else 1
    return T.reshape(dk, dk)


def partial_transpose(X: np.ndarray, shape, which: Iterable[int]) -> np.ndarray:
    shape = _as_shape(shape)
    shape.check(np.asarray(X))
    n = len(shape.dims)
    which = set(int(w) for w in which)
    if any(w < 0 or w >= n for w in which):
        raise ValueError(f"invalid subsystem selection {sorted(which)}")
    axes = list(range(2 * n))
    for w in which:
        axes[w], axes[n + w] = n + w, w
    return _tensor_form(X, shape.dims).transpose(axes).reshape(X.shape)


def permute_subsystems(X: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: output factor ``k`` is input factor ``order[k]``."""
    n = len(dims)
    T = _tensor_form(X, dims).transpose(list(order) + [n + o for o in order])
    D = int(np.prod(dims))
    return T.reshape(D, D)


def realign(X: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Map ``X[(a,c),(b,e)]`` on ``C^d1 (x) C^d2`` to ``X~[(a,b),(c,e)]``.

    Applied to a Choi operator (output first) this yields the matrix of the
    channel acting on row-major vectorized inputs.
    """
    T = np.asarray(X).reshape(d1, d2, d1, d2)
    return T.transpose(0, 2, 1, 3).reshape(d1 * d1, d2 * d2)


def unrealign(Xr: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Inverse of :func:`realign`."""
    T = np.asarray(Xr).reshape(d1, d1, d2, d2)
    return T.transpose(0, 2, 1, 3).reshape(d1 * d2, d1 * d2)


def link_product(R1: np.ndarray, shape1, R2: np.ndarray, shape2,
                 connected: Iterable[int] | None = None) -> tuple[np.ndarray, SubsystemShape]:
    """Link product ``Tr_K[R1^{T_K} R2]`` over the wires ``K`` shared by label.

    Returns the resulting operator together with its shape: the unconnected
    wires of ``R1`` followed by those of ``R2``, each in original order.
    """
    s1, s2 = _as_shape(shape1), _as_shape(shape2)
    R1 = np.asarray(R1)
    R2 = np.asarray(R2)
    s1.check(R1)
    s2.check(R2)
    shared = set(s1.labels) & set(s2.labels)
    K = shared if connected is None else set(int(c) for c in connected)
    if K != shared:
        missing = K - shared
        if missing:
            raise ValueError(f"connected labels {sorted(missing)} not present on both operators")
        raise ValueError(f"labels {sorted(shared - K)} appear on both operators but are not connected")
    for k in K:
        if s1.dim_of(k) != s2.dim_of(k):
            raise ValueError(f"wire {k} has dimension {s1.dim_of(k)} vs {s2.dim_of(k)}")

    n1, n2 = len(s1.dims), len(s2.dims)
    counter = iter(range(10 ** 6))
    r1 = [next(counter) for _ in range(n1)]
    c1 = [next(counter) for _ in range(n1)]
    r2 = [next(counter) for _ in range(n2)]
    c2 = [next(counter) for _ in range(n2)]
    for k in K:
        i, j = s1.index(k), s2.index(k)
        r2[j] = r1[i]
        c2[j] = c1[i]
    free1 = [i for i, l in enumerate(s1.labels) if l not in K]
    free2 = [j for j, l in enumerate(s2.labels) if l not in K]
    out = [r1[i] for i in free1] + [r2[j] for j in free2] + [c1[i] for i in free1] + [c2[j] for j in free2]
    T = np.einsum(_tensor_form(R1, s1.dims), r1 + c1, _tensor_form(R2, s2.dims), r2 + c2, out)
    dims = tuple(s1.dims[i] for i in free1) + tuple(s2.dims[j] for j in free2)
    labels = tuple(s1.labels[i] for i in free1) + tuple(s2.labels[j] for j in free2)
    if not dims:
        return T.reshape(1, 1), SubsystemShape((1,), (-1,))
    D = int(np.prod(dims))
    return T.reshape(D, D), SubsystemShape(dims, labels)


def reorder_to(X: np.ndarray, shape: SubsystemShape, labels: Sequence[int]) -> np.ndarray:
    """Permute factors of ``X`` so that they follow the label order ``labels``."""
    order = [shape.index(l) for l in labels]
    return permute_subsystems(X, shape.dims, order)


# ---------------------------------------------------------------------------
# spectral helpers

def moore_penrose(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose inverse; singular values below ``tol * s_max`` count as zero."""
    return np.linalg.pinv(np.asarray(M), rcond=tol)


def hermitian_part(A: np.ndarray) -> np.ndarray:
    return (A + A.conj().T) / 2


def is_hermitian(A: np.ndarray, tol: float = CHECK_TOL) -> bool:
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and np.allclose(A, A.conj().T, atol=tol, rtol=0)


def min_eigenvalue(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(np.asarray(A)))[0])


def is_psd(A: np.ndarray, tol: float = CHECK_TOL) -> bool:
    return is_hermitian(A, tol) and min_eigenvalue(A) >= -tol


def is_density(rho: np.ndarray, tol: float = CHECK_TOL) -> bool:
    return is_psd(rho, tol) and abs(np.trace(rho) - 1) <= tol


def psd_power(A: np.ndarray, power: float, rtol: float = 1e-10) -> np.ndarray:
    """Matrix power of a PSD operator on its support (pseudo-inverse for negative powers)."""
    w, V = np.linalg.eigh(hermitian_part(np.asarray(A)))
    cut = rtol * max(float(np.max(np.abs(w))), 0.0)
    wp = np.zeros_like(w)
    keep = w > cut
    wp[keep] = w[keep] ** power
    return (V * wp) @ V.conj().T


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    return psd_power(A, 0.5)


def trace_distance(A: np.ndarray, B: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(A - B)))))


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian basis of ``L(C^d)``: ``I/sqrt(d)`` first, then
    the normalized generalized Gell-Mann matrices (Paulis / sqrt 2 for d=2)."""
    out = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            S = np.zeros((d, d), dtype=complex)
            S[j, k] = S[k, j] = 1 / np.sqrt(2)
            A = np.zeros((d, d), dtype=complex)
            A[j, k], A[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            out += [S, A]
    for l in range(1, d):
        D = np.diag([1.0] * l + [-l] + [0.0] * (d - l - 1)).astype(complex)
        out.append(D / np.sqrt(l * (l + 1)))
    return np.array(out)


# ---------------------------------------------------------------------------
# random objects

def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def haar_random_unitary(d: int, rng=None, size: int | None = None) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The phases of ``diag(R)`` are moved into ``Q`` so the result is exactly
    Haar rather than QR-convention dependent.  With ``size`` a stack of shape
    ``(size, d, d)`` is returned.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    rng = _rng(rng)
    n = 1 if size is None else size
    Z = (rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    diag = np.diagonal(R, axis1=1, axis2=2)
    Q = Q * (diag / np.abs(diag))[:, None, :]
    return Q[0] if size is None else Q


def twirl_check(X: np.ndarray, samples: int, rng=None, batch: int = 20000) -> np.ndarray:
    """Monte Carlo average of ``U X U^dag`` over Haar unitaries (-> ``Tr[X] I / d``)."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("twirl needs a square operator")
    rng = _rng(rng)
    d = X.shape[0]
    acc = np.zeros((d, d), dtype=complex)
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        U = haar_random_unitary(d, rng, size=n)
        acc += np.einsum("kij,jl,kml->im", U, X, U.conj())
        done += n
    return acc / samples


def random_density(d: int, rng=None, rank: int | None = None) -> np.ndarray:
    """Random density operator (Hilbert-Schmidt measure for full rank)."""
    rng = _rng(rng)
    r = d if rank is None else rank
    G = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_pure_state(d: int, rng=None) -> np.ndarray:
    rng = _rng(rng)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_hermitian(d: int, rng=None) -> np.ndarray:
    rng = _rng(rng)
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (G + G.conj().T) / 2


def random_operator(shape, rng=None) -> np.ndarray:
    rng = _rng(rng)
    shape = (shape, shape) if isinstance(shape, int) else tuple(shape)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# serialization

def operator_to_dict(X: np.ndarray) -> dict:
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    flat = X.reshape(-1)
    return {"rows": int(X.shape[0]), "cols": int(X.shape[1]),
            "re": [float(v) for v in flat.real], "im": [float(v) for v in flat.imag]}


def operator_from_dict(obj: dict) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed operator record: {exc}") from exc
    if re.size != rows * cols or im.size != rows * cols:
        raise ValueError("entry count does not match rows*cols")
    return (re + 1j * im).reshape(rows, cols)
