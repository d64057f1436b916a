"""Small dense kernels: centering matrix, symmetric pseudo-inverse, Kronecker product.

All matrices handled here are small (D up to a few hundred) and symmetric
where an inverse is needed, so pseudo-inverses go through a symmetric
eigendecomposition rather than an SVD.  That keeps the output exactly
symmetric.
"""

from typing import NamedTuple

import numpy as np

from .errors import ContractViolationError, InvalidDimensionError

RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-8


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # orthonormal columns


def centering_matrix(D):
    """Return ``I - J/D``, the projection sweeping out a D-vector's mean.

    Parameters
    ----------
    D : int
        Dimension, at least 1.

    Returns
    -------
    ndarray of shape (D, D)
    """
    if int(D) != D or D < 1:
        raise InvalidDimensionError(f"centering matrix needs D >= 1, got {D!r}")
    D = int(D)
    return np.eye(D) - np.full((D, D), 1.0 / D)


def check_symmetric(M, tol=SYMMETRY_TOL):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolationError(f"expected a square matrix, got shape {M.shape}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale > 0 and np.max(np.abs(M - M.T)) > tol * scale:
        raise ContractViolationError(
            f"matrix is not symmetric: max |M - M'| = {np.max(np.abs(M - M.T)):.3g}"
        )
    return M


def sym_eig(M):
    """Eigendecomposition of a symmetric matrix, eigenvalues in descending order."""
    M = check_symmetric(M)
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(vals)[::-1]
    return EigenDecomposition(vals[order], vecs[:, order])


def sym_pseudo_inverse(M, rank_tol=RANK_TOL):
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Eigenvalues with ``|lambda| <= rank_tol * max|lambda|`` are treated as
    zero.

    Raises
    ------
    ContractViolationError
        If ``M`` is not symmetric to within ``1e-8 * max|M|``.
    """
    vals, vecs = sym_eig(M)
    if vals.size == 0:
        return np.zeros_like(np.asarray(M, dtype=float))
    cutoff = rank_tol * np.max(np.abs(vals))
    keep = np.abs(vals) > cutoff
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / vals[keep]
    P = (vecs * inv) @ vecs.T
    return 0.5 * (P + P.T)


def numerical_rank(M, rank_tol=RANK_TOL):
    vals = sym_eig(M).eigenvalues
    if vals.size == 0 or np.max(np.abs(vals)) == 0:
        return 0
    return int(np.sum(np.abs(vals) > rank_tol * np.max(np.abs(vals))))


def kron(A, B):
    """Kronecker product; entry ``(i*nB + j, k*mB + l)`` is ``A[i, k] * B[j, l]``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    nA, mA = A.shape
    nB, mB = B.shape
    return (A[:, None, :, None] * B[None, :, None, :]).reshape(nA * nB, mA * mB)
