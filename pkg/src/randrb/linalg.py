"""Numerical kernel layer: sparse storage, sparse direct solves and SVDs.

Sparse operators are plain :class:`scipy.sparse.csr_matrix` objects kept in
canonical form (sorted column indices, no duplicates, no stored zeros).
Factorizations wrap SuperLU; dense SVDs go through LAPACK.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LinalgError(Exception):
    """Base class for errors raised by the kernel layer."""


class SingularMatrix(LinalgError):
    pass


class NonConvergence(LinalgError):
    pass


class ZeroMatrix(LinalgError):
    pass


# relative pivot size below which a factorization is declared singular
PIVOT_TOL = 1e-14


def canonical(S) -> sp.csr_matrix:
    """Return ``S`` as a canonical CSR matrix.

    Duplicates are summed, column indices sorted per row and explicit zeros
    removed, so two operators with equal entries have equal storage.
    """
    S = sp.csr_matrix(S, dtype=np.float64, copy=True)
    S.sum_duplicates()
    S.eliminate_zeros()
    S.sort_indices()
    return S


def frobenius(S) -> float:
    if sp.issparse(S):
        return float(np.sqrt(np.sum(S.data**2)))
    return float(np.linalg.norm(S, "fro"))


class Factorization:
    """Sparse LU factors of a square operator, reusable for many right-hand sides.

    The object is never mutated after construction, so one instance can be
    shared by concurrent solvers.
    """

    def __init__(self, S):
        S = sp.csc_matrix(S, dtype=np.float64)
        n, m = S.shape
        if n != m:
            raise ValueError(f"cannot factorize a non-square {n}x{m} matrix")
        self.shape = (n, m)
        try:
            self._lu = spla.splu(S)
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from exc
        pivots = np.abs(self._lu.U.diagonal())
        scale = max(float(np.max(np.abs(S.data))) if S.nnz else 0.0, np.finfo(float).tiny)
        if pivots.size == 0 or pivots.min() <= PIVOT_TOL * scale:
            raise SingularMatrix(
                f"near-zero pivot {pivots.min() if pivots.size else 0.0:.3e} "
                f"(matrix scale {scale:.3e})"
            )

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"rhs has {b.shape[0]} rows, operator has {self.shape[0]}")
        return self._lu.solve(b)


def factorize(S) -> Factorization:
    return Factorization(S)


def svd(A: np.ndarray):
    """Thin SVD ``A = U @ diag(sigma) @ Vt`` with ``sigma`` non-increasing.

    Falls back from the divide-and-conquer driver to the QR-iteration driver
    before giving up with :class:`NonConvergence`.
    """
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    for driver in ("gesdd", "gesvd"):
        try:
            return scipy.linalg.svd(A, full_matrices=False, lapack_driver=driver)
        except np.linalg.LinAlgError:
            continue
    raise NonConvergence(f"SVD of a {A.shape[0]}x{A.shape[1]} matrix did not converge")


def truncated_svd(A: np.ndarray, tol: float, return_singular_values: bool = False):
    """Left singular vectors whose singular value exceeds ``tol * sigma[0]``.

    Parameters
    ----------
    A
        Dense matrix, typically a snapshot matrix with one column per snapshot.
    tol
        Relative truncation threshold in (0, 1].
    return_singular_values
        If true, also return the full singular value vector of ``A``.
    """
    if not 0.0 < tol <= 1.0:
        raise ValueError(f"tol must lie in (0, 1], got {tol}")
    U, sigma, _ = svd(A)
    if sigma.size == 0 or sigma[0] == 0.0:
        raise ZeroMatrix("cannot truncate the SVD of a zero matrix")
    n = max(1, int(np.count_nonzero(sigma > tol * sigma[0])))
    if return_singular_values:
        return U[:, :n], sigma
    return U[:, :n]


def orthonormalize(Y: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of ``range(Y)`` via SVD, dropping directions below ``rtol``."""
    if Y.shape[1] == 0:
        return Y.copy()
    U, sigma, _ = svd(Y)
    if sigma[0] == 0.0:
        return U[:, :0]
    return U[:, sigma > rtol * sigma[0]]
