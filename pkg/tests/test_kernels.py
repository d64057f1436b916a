import os
import subprocess
import sys

import numpy as np
import pytest

from compql import _pykernels, kernels
from compql.solver import _per_object_weights

try:
    from compql import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def problem(rng, N, D, p):
    X = np.column_stack([np.ones(N), rng.normal(size=(N, p))])
    B = rng.normal(size=(D, p + 1))
    P = rng.dirichlet(np.ones(D), size=N)
    P[rng.random(P.shape) < 0.05] = 0
    P[P.sum(axis=1) == 0, 0] = 1
    P /= P.sum(axis=1, keepdims=True)
    return P, X, B


def test_reference_kernels_against_loops(rng):
    P, X, B = problem(rng, 9, 3, 2)
    Pi, R, S = _pykernels.score_terms(P, X, B)
    for i in range(9):
        eta = B @ X[i]
        pi = np.exp(eta) / np.exp(eta).sum()
        np.testing.assert_allclose(Pi[i], pi, atol=1e-15)
        w = P[i] / pi - 1
        np.testing.assert_allclose(R[i], w - w.mean(), atol=1e-13)
    np.testing.assert_allclose(S, R.T @ X, atol=1e-12)
    M = _pykernels.meat_sum(R, X)
    ref = sum(np.outer(np.kron(R[i], X[i]), np.kron(R[i], X[i])) for i in range(9))
    np.testing.assert_allclose(M, ref, atol=1e-12)
    G = _per_object_weights(Pi)
    ref = sum(np.kron(G[i], np.outer(X[i], X[i])) for i in range(9))
    np.testing.assert_allclose(_pykernels.info_sum(G, X), ref, atol=1e-12)
    W = np.eye(3) + 0.1
    d = _pykernels.pairwise_quadform(R, W)
    assert d[2, 5] == pytest.approx((R[2] - R[5]) @ W @ (R[2] - R[5]))


@needs_ext
@pytest.mark.parametrize("shape", [(1, 2, 0), (17, 3, 1), (200, 5, 3), (64, 8, 2)])
def test_backends_agree(rng, shape):
    P, X, B = problem(rng, *shape)
    for a, b in zip(_pykernels.score_terms(P, X, B), _ckernels.score_terms(P, X, B)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13 * max(1.0, np.abs(a).max()))
    eta = X @ B.T * 50
    np.testing.assert_allclose(_pykernels.softmax_rows(eta), _ckernels.softmax_rows(eta), rtol=1e-13, atol=1e-300)
    Pi, R, _ = _pykernels.score_terms(P, X, B)
    G = _per_object_weights(Pi)
    np.testing.assert_allclose(_pykernels.info_sum(G, X), _ckernels.info_sum(G, X), rtol=1e-11, atol=1e-11)
    np.testing.assert_allclose(_pykernels.meat_sum(R, X), _ckernels.meat_sum(R, X), rtol=1e-11, atol=1e-11)
    W = np.eye(R.shape[1])
    np.testing.assert_allclose(_pykernels.pairwise_quadform(R, W), _ckernels.pairwise_quadform(R, W), atol=1e-12)


@needs_ext
def test_kernels_accept_readonly_input(rng):
    P, X, B = problem(rng, 10, 3, 1)
    for a in (P, X, B):
        a.setflags(write=False)
    _ckernels.score_terms(P, X, B)


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.get_backend("python") is _pykernels
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_var_forces_fallback():
    env = dict(os.environ, COMPQL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import compql.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
