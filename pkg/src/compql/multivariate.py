"""Compositional covariance, null-correlation structure and distances.

Residuals here are taken about the arithmetic-mean composition, with no
regression model: ``r_i = C diag(pbar)^-1 (p_i - pbar)``.  Their covariance
estimates ``C Phi C``.

When ``Phi`` is diagonal (null correlation on the original scale) the
centered dispersion has the form ``C diag(phi) C``.  For D >= 3 this map
from ``phi`` is one-to-one, so the variances are identified; for D = 3 the
family fills the whole space of centered matrices and the structure check
has nothing to test.  For D = 2 ``phi`` is identified only up to a common
shift and the minimum-norm solution is reported.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DegenerateProbabilityError, ZerosUnsupportedError
from .inference import estimate_centered_dispersion
from .linalg import centering_matrix, sym_pseudo_inverse
from .variance import CenteredDispersion

METRICS = ("mahalanobis_phi", "identity", "aitchison")


@dataclass(frozen=True)
class DistanceMatrix:
    entries: np.ndarray
    metric_kind: str
    squared: bool = False

    @property
    def dim(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class NullCorrelationDiagnostic:
    fitted_variances: np.ndarray
    structure_residual: float
    bootstrap_p: float = None
    bootstrap_reps: int = 0


def _compositions(data):
    return np.asarray(getattr(data, "compositions", data), dtype=float)


def compositional_residuals(data):
    """Standardized residuals about the arithmetic-mean composition."""
    P = _compositions(data)
    pbar = P.mean(axis=0)
    if np.any(pbar <= 0):
        raise DegenerateProbabilityError("a part is zero in every object; its mean is zero")
    W = P / pbar - 1.0
    return W - W.mean(axis=1, keepdims=True)


def _structure_basis(D):
    """Columns ``vec(C e_k e_k' C)`` spanning the null-correlation family."""
    C = centering_matrix(D)
    return np.column_stack([np.outer(C[:, k], C[:, k]).ravel() for k in range(D)])


def _structure_fit(S, basis):
    phi, *_ = np.linalg.lstsq(basis, S.ravel(), rcond=None)
    resid = S.ravel() - basis @ phi
    return phi, resid


def null_correlation_diagnostic(dispersion, bootstrap_reps=0, residuals=None, q=1, seed=0):
    """Distance from ``dispersion`` to the nearest ``C diag(phi) C``.

    The fit is ordinary least squares in ``phi`` (minimum-norm when
    ``phi`` is not identified).  With ``residuals`` and ``bootstrap_reps > 0``
    a heuristic p-value is computed by resampling objects: the statistic is
    compared with the bootstrap distribution of the unstructured part of
    ``S* - S``, which is centred on the null.

    Parameters
    ----------
    dispersion : CenteredDispersion or array
    bootstrap_reps : int
    residuals : array_like, shape (N, D), optional
    q : int
        Degrees-of-freedom correction used when re-estimating the dispersion.
    seed : int
    """
    if bootstrap_reps < 0:
        raise ConfigError("bootstrap_reps must be nonnegative")
    S = dispersion.matrix if isinstance(dispersion, CenteredDispersion) else np.asarray(dispersion, float)
    D = S.shape[0]
    basis = _structure_basis(D)
    phi, resid = _structure_fit(S, basis)
    stat = float(np.linalg.norm(resid))
    if residuals is None or bootstrap_reps == 0:
        return NullCorrelationDiagnostic(phi, stat)
    R = np.asarray(residuals, dtype=float)
    N = R.shape[0]
    proj = basis @ np.linalg.pinv(basis)
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(bootstrap_reps):
        Rb = R[rng.integers(0, N, size=N)]
        Sb = Rb.T @ Rb / (N - q)
        dev = (Sb - S).ravel()
        if np.linalg.norm(dev - proj @ dev) >= stat:
            exceed += 1
    p = (exceed + 1) / (bootstrap_reps + 1)
    return NullCorrelationDiagnostic(phi, stat, p, bootstrap_reps)


def null_correlation_test(residuals, bootstrap_reps=199, q=1, seed=0):
    """Convenience wrapper: estimate the dispersion from ``residuals`` and run the diagnostic."""
    disp = estimate_centered_dispersion(residuals, q=q)
    return null_correlation_diagnostic(disp, bootstrap_reps, residuals, q=q, seed=seed)


def distance_matrix(residuals, kind="identity", dispersion=None, squared=False):
    """Pairwise distances between standardized residual vectors.

    ``identity`` uses ``(r_i - r_j)'(r_i - r_j)``; ``mahalanobis_phi`` uses
    ``(r_i - r_j)'(C Phi C)^+ (r_i - r_j)`` and needs ``dispersion``.
    """
    R = np.ascontiguousarray(residuals, dtype=float)
    D = R.shape[1]
    if kind == "identity":
        W = np.eye(D)
    elif kind == "mahalanobis_phi":
        if dispersion is None:
            raise ConfigError("mahalanobis_phi distances need a dispersion estimate")
        S = dispersion.matrix if isinstance(dispersion, CenteredDispersion) else np.asarray(dispersion)
        W = sym_pseudo_inverse(S)
    else:
        raise ConfigError(f"unknown distance kind {kind!r}")
    d2 = kernels.pairwise_quadform(R, np.ascontiguousarray(W))
    return DistanceMatrix(d2 if squared else np.sqrt(d2), kind, squared)


def clr_residuals(data):
    """``C log(p_i / g)`` with ``g`` the closed geometric-mean composition."""
    P = _compositions(data)
    if np.any(P <= 0):
        raise ZerosUnsupportedError("Aitchison distance is undefined for compositions with zero parts")
    L = np.log(P)
    g = np.exp(L.mean(axis=0))
    g = g / g.sum()
    Z = L - np.log(g)
    return Z - Z.mean(axis=1, keepdims=True)


def aitchison_distance_matrix(data, squared=False):
    """Aitchison distances: Euclidean distances between centred log-ratio vectors."""
    R = np.ascontiguousarray(clr_residuals(data))
    d2 = kernels.pairwise_quadform(R, np.eye(R.shape[1]))
    return DistanceMatrix(d2 if squared else np.sqrt(d2), "aitchison", squared)
