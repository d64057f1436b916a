"""Pure numpy implementations of the per-object kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop by
loop.  Both must return identical results to within rounding.
"""

import numpy as np


def softmax_rows(eta):
    eta = np.asarray(eta, dtype=float)
    z = eta - eta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def score_terms(P, X, B):
    """Fitted compositions, standardized residuals and total quasi-score.

    Returns ``(Pi, R, S)`` where ``Pi[i] = softmax(B @ x_i)``,
    ``R[i] = C (p_i / pi_i - 1)`` and ``S = R' X`` (shape D x (p+1)).
    """
    Pi = softmax_rows(X @ B.T)
    W = P / Pi - 1.0
    R = W - W.mean(axis=1, keepdims=True)
    return Pi, R, R.T @ X


def info_sum(G, X):
    """Sum over objects of ``kron(G[i], outer(x_i, x_i))``."""
    N, D, _ = G.shape
    q = X.shape[1]
    A = np.einsum("ikl,ir,is->krls", G, X, X, optimize=True)
    return A.reshape(D * q, D * q)


def meat_sum(R, X):
    """Sum over objects of ``s_i s_i'`` with ``s_i = kron(r_i, x_i)``."""
    N, D = R.shape
    q = X.shape[1]
    Sc = (R[:, :, None] * X[:, None, :]).reshape(N, D * q)
    return Sc.T @ Sc


def pairwise_quadform(R, W):
    """Matrix of ``(r_i - r_j)' W (r_i - r_j)`` over all pairs."""
    N = R.shape[0]
    d2 = np.zeros((N, N))
    for i in range(N):
        diff = R[i + 1:] - R[i]
        d2[i, i + 1:] = np.einsum("jk,kl,jl->j", diff, W, diff)
    d2 = d2 + d2.T
    return np.maximum(d2, 0.0)
