"""Sparse storage, factorize-once/solve-many, and small dense eigensolves.

Sparse matrices are plain ``scipy.sparse.csr_matrix`` objects with sorted
column indices and no duplicates.  The factorization is SuperLU run in
symmetric mode without pivoting, so for a symmetric matrix it is an
``L D L^T`` decomposition and the pivots double as a positive-definiteness
check.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "FactorizationError",
    "Factorization",
    "assemble",
    "factorize",
    "solve",
    "generalized_eig_smallest",
    "write_matrix_market",
    "read_matrix_market",
]


class FactorizationError(ArithmeticError):
    """Raised when a matrix expected to be SPD produces a non-positive pivot."""

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


def assemble(rows: int, cols: int, triplets: Iterable[tuple[int, int, float]]) -> sp.csr_matrix:
    """Build a CSR matrix from ``(i, j, value)`` triplets, summing duplicates."""
    trip = list(triplets)
    if trip:
        i, j, v = (np.asarray(a) for a in zip(*trip))
        i = i.astype(np.int64)
        j = j.astype(np.int64)
        v = v.astype(np.float64)
    else:
        i = j = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    if i.size and (i.min() < 0 or i.max() >= rows or j.min() < 0 or j.max() >= cols):
        bad = next(k for k in range(i.size) if not (0 <= i[k] < rows and 0 <= j[k] < cols))
        raise IndexError(f"triplet {bad} ({i[bad]}, {j[bad]}) outside a {rows}x{cols} matrix")
    A = sp.csr_matrix((v, (i, j)), shape=(rows, cols))
    A.sum_duplicates()
    A.sort_indices()
    return A


class Factorization:
    """Reusable factorization of a symmetric positive-definite sparse matrix."""

    # number of factorizations performed in this process; read by tests
    count = 0

    def __init__(self, A):
        A = sp.csc_matrix(A, dtype=np.float64)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.n = A.shape[0]
        Factorization.count += 1
        try:
            lu = splu(
                A,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options=dict(SymmetricMode=True),
            )
        except RuntimeError as exc:  # exactly singular pivot
            raise FactorizationError(f"factorization failed: {exc}") from exc
        pivots = lu.U.diagonal()
        bad = np.flatnonzero(~(pivots > 0.0))
        if bad.size:
            k = int(bad[0])
            original = int(np.argsort(lu.perm_c)[k])
            raise FactorizationError(
                f"non-positive pivot {pivots[k]:.3e} at row {original}; matrix is not SPD",
                pivot_index=original,
            )
        self._lu = lu

    @property
    def nnz(self) -> int:
        return self._lu.L.nnz + self._lu.U.nnz

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.n}")
        return self._lu.solve(b)


def factorize(A) -> Factorization:
    return Factorization(A)


def solve(F: Factorization, b) -> np.ndarray:
    return F.solve(b)


def generalized_eig_smallest(R, G, k: int, return_vectors: bool = False):
    """The ``k`` smallest eigenvalues of ``R v = lam G v`` (ascending).

    ``G`` must be symmetric positive definite; values within ``-1e-10`` of
    zero are clipped to zero.
    """
    R = R.toarray() if sp.issparse(R) else np.asarray(R, dtype=np.float64)
    G = G.toarray() if sp.issparse(G) else np.asarray(G, dtype=np.float64)
    if R.shape != G.shape or R.shape[0] != R.shape[1]:
        raise ValueError(f"shape mismatch: R {R.shape}, G {G.shape}")
    k = min(k, R.shape[0])
    try:
        w, V = scipy.linalg.eigh(R, G, subset_by_index=[0, k - 1])
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"G is not symmetric positive definite: {exc}") from exc
    w = np.where((w < 0) & (w >= -1e-10), 0.0, w)
    return (w, V) if return_vectors else w


def write_matrix_market(path, A, comment: str = "") -> Path:
    """Coordinate-format export with 17 significant digits."""
    A = sp.coo_matrix(A)
    A.sum_duplicates()
    order = np.lexsort((A.col, A.row))
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        for line in comment.splitlines():
            fh.write(f"% {line}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for r, c, v in zip(A.row[order], A.col[order], A.data[order]):
            fh.write(f"{r + 1} {c + 1} {v:.17g}\n")
    return path


def read_matrix_market(path) -> sp.csr_matrix:
    A = sp.csr_matrix(scipy.io.mmread(str(path)))
    A.sort_indices()
    return A
