"""Exact linear-algebra core: sorted Hessian spectra and truncated traces.

The operator of interest acts on a symmetric matrix A through the sum of its
k smallest (or largest) eigenvalues, plus a first-order drift term.  All
functions here are pure and operate on small dense matrices (n <= 16 in
practice).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SymMatrix",
    "SpectralDecomp",
    "KFrame",
    "eigenvalues_sorted",
    "jacobi_eigenvalues",
    "pk_minus",
    "pk_plus",
    "trace_over_subspace",
    "fk_value",
]


class SpectralError(ValueError):
    """Invalid input to a spectral operation."""


@dataclass(frozen=True)
class SymMatrix:
    """An n x n real symmetric matrix, symmetrized at construction.

    Discrete Hessians assembled from finite differences carry asymmetric
    rounding noise, so the constructor stores (A + A^T)/2.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise SpectralError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise SpectralError("matrix has non-finite entries")
        object.__setattr__(self, "entries", 0.5 * (a + a.T))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.entries))


@dataclass(frozen=True)
class SpectralDecomp:
    """Sorted eigenvalues of a symmetric matrix, optionally with eigenframe."""

    eigenvalues: np.ndarray
    frame: np.ndarray | None = None  # rows are orthonormal eigenvectors

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(ev) < 0):
            raise SpectralError("eigenvalues must be non-decreasing")
        object.__setattr__(self, "eigenvalues", ev)


@dataclass(frozen=True)
class KFrame:
    """k orthonormal vectors spanning a k-dimensional subspace of R^n."""

    vectors: np.ndarray  # shape (k, n)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2:
            raise SpectralError("frame must be a (k, n) array")
        k, n = v.shape
        if not (1 <= k <= n):
            raise SpectralError(f"need 1 <= k <= n, got k={k}, n={n}")
        gram = v @ v.T
        if np.max(np.abs(gram - np.eye(k))) > 1e-12:
            raise SpectralError("frame vectors are not orthonormal to 1e-12")
        object.__setattr__(self, "vectors", v)

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _as_sym(a) -> SymMatrix:
    return a if isinstance(a, SymMatrix) else SymMatrix(a)


def eigenvalues_sorted(a: SymMatrix | np.ndarray, with_frame: bool = False) -> SpectralDecomp:
    """Full spectrum of a symmetric matrix in non-decreasing order."""
    m = _as_sym(a)
    if with_frame:
        ev, vec = np.linalg.eigh(m.entries)
        return SpectralDecomp(ev, vec.T)
    return SpectralDecomp(np.linalg.eigvalsh(m.entries))


def jacobi_eigenvalues(a: SymMatrix | np.ndarray, threshold: float = 1e-14,
                       max_sweeps: int = 50) -> np.ndarray:
    """Sorted eigenvalues by cyclic Jacobi rotations.

    Independent of the LAPACK path in :func:`eigenvalues_sorted`; used as a
    cross-check oracle for small matrices.
    """
    m = _as_sym(a).entries.copy()
    n = m.shape[0]
    scale = max(np.max(np.abs(m)), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(m, -1) ** 2))
        if off <= threshold * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(m[p, q]) <= threshold * scale * 1e-2:
                    continue
                theta = 0.5 * (m[q, q] - m[p, p]) / m[p, q]
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                m = rot.T @ m @ rot
                m = 0.5 * (m + m.T)
    return np.sort(np.diag(m))


def _check_k(k: int, n: int):
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= n):
        raise SpectralError(f"k must satisfy 1 <= k <= {n}, got {k}")


def pk_minus(a: SymMatrix | np.ndarray, k: int) -> float:
    """Sum of the k smallest eigenvalues."""
    m = _as_sym(a)
    _check_k(k, m.dim)
    ev = np.linalg.eigvalsh(m.entries)
    return float(np.sum(ev[:k]))


def pk_plus(a: SymMatrix | np.ndarray, k: int) -> float:
    """Sum of the k largest eigenvalues."""
    m = _as_sym(a)
    _check_k(k, m.dim)
    ev = np.linalg.eigvalsh(m.entries)
    return float(np.sum(ev[-k:]))


def trace_over_subspace(a: SymMatrix | np.ndarray, w: KFrame) -> float:
    """Trace of A restricted to the subspace spanned by the frame.

    Always >= pk_minus(A, k); equality at the bottom eigenframe.
    """
    m = _as_sym(a)
    if w.dim != m.dim:
        raise SpectralError(f"frame dimension {w.dim} != matrix dimension {m.dim}")
    v = w.vectors
    return float(np.einsum("ij,jk,ik->", v, m.entries, v))


def fk_value(hessian: SymMatrix | np.ndarray, gradient, k: int, h: float,
             sign: str = "minus") -> float:
    """Truncated-trace operator value from Hessian and gradient data.

    ``minus`` gives (sum of k smallest eigenvalues) - h|g|; ``plus`` gives
    (sum of k largest) + h|g|.
    """
    if h < 0:
        raise SpectralError("drift coefficient h must be >= 0")
    g = np.asarray(gradient, dtype=float)
    gn = float(np.linalg.norm(g))
    if sign == "minus":
        return pk_minus(hessian, k) - h * gn
    if sign == "plus":
        return pk_plus(hessian, k) + h * gn
    raise SpectralError(f"sign must be 'minus' or 'plus', got {sign!r}")
