"""Backend selection for the per-object kernels.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy versions in ``_pykernels`` take over.  Setting ``COMPQL_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("COMPQL_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython", "python" or None for the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def softmax_rows(eta):
    return _impl.softmax_rows(eta)


def score_terms(P, X, B):
    return _impl.score_terms(P, X, B)


def info_sum(G, X):
    return _impl.info_sum(G, X)


def meat_sum(R, X):
    return _impl.meat_sum(R, X)


def pairwise_quadform(R, W):
    return _impl.pairwise_quadform(R, W)
