"""Dispersion estimation, coefficient covariances and Wald tests.

Coefficient vectors and covariances use part-major ordering: entry
``k*(p+1) + r`` belongs to part ``k`` and design column ``r``.  Covariances
are expressed in the parameterisation of the fit's identification
constraint by projecting with ``(I - 1 c') kron I``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import IdentifiabilityError, InsufficientDataError
from .linalg import centering_matrix, check_symmetric, sym_pseudo_inverse
from .model import SUM_TO_ZERO, IdentificationConstraint
from .variance import CenteredDispersion


@dataclass(frozen=True)
class CoefficientCovariance:
    matrix: np.ndarray
    flavor: str  # "model_based" or "sandwich"
    constraint: IdentificationConstraint = SUM_TO_ZERO
    n_parts: int = 0

    def __post_init__(self):
        M = check_symmetric(np.array(self.matrix, dtype=float), tol=1e-9)
        M = 0.5 * (M + M.T)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def std_errors(self):
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))


@dataclass(frozen=True)
class WaldTest:
    contrast: np.ndarray
    estimate: float
    std_error: float
    z_value: float


def standardized_residuals(fit, data=None):
    """Return ``r_i = C Pi_i^-1 (p_i - pi_i)`` for every object (N x D).

    ``data`` may be supplied to recompute the residuals against a different
    dataset with the same design.
    """
    if data is None:
        return np.array(fit.residuals)
    _, R, _ = kernels.score_terms(np.asarray(data.compositions), data.design_matrix(), fit.B)
    return R


def estimate_centered_dispersion(residuals, q=1):
    """Empirical ``sum_i r_i r_i' / (N - q)`` estimating ``C Phi C``.

    Parameters
    ----------
    residuals : array_like, shape (N, D)
        Standardized residuals.
    q : int
        Number of mean parameters per part (``p + 1``), used as the
        degrees-of-freedom correction.
    """
    R = np.asarray(residuals, dtype=float)
    N = R.shape[0]
    if N <= q:
        raise InsufficientDataError(f"need more than {q} objects to estimate dispersion, got {N}")
    R = R - R.mean(axis=1, keepdims=True)
    S = R.T @ R / (N - q)
    return CenteredDispersion(0.5 * (S + S.T), provenance="estimated", df=N - q)


def _constraint_projector(constraint, D, q):
    return np.kron(constraint.projector(D), np.eye(q))


def model_vcov(dispersion, X, constraint=SUM_TO_ZERO):
    """Model-based covariance ``(C Phi C) kron (X'X)^-`` of the coefficient estimates."""
    X = np.asarray(X, dtype=float)
    XtX = X.T @ X
    if np.linalg.matrix_rank(XtX) < XtX.shape[0]:
        warnings.warn("design matrix is rank deficient; using a generalized inverse", stacklevel=2)
    S = dispersion.matrix if isinstance(dispersion, CenteredDispersion) else np.asarray(dispersion)
    V = np.kron(S, sym_pseudo_inverse(XtX))
    P = _constraint_projector(constraint, S.shape[0], X.shape[1])
    return CoefficientCovariance(P @ V @ P.T, "model_based", constraint, S.shape[0])


def fit_vcov(fit, data, dispersion=None):
    """Model-based covariance for a fit, estimating ``C Phi C`` from its residuals unless given."""
    X = data.design_matrix()
    if dispersion is None:
        dispersion = estimate_centered_dispersion(fit.residuals, q=X.shape[1])
    return model_vcov(dispersion, X, fit.coefficients.constraint)


def sandwich_vcov(fit, data):
    """Robust covariance ``A^- M A^-`` from per-object quasi-score contributions.

    ``A = C kron X'X`` is the quasi-information of the dispersion-free
    estimating equations and ``M = sum_i s_i s_i'`` with
    ``s_i = r_i kron x_i``.
    """
    X = data.design_matrix()
    R = standardized_residuals(fit, None if fit.residuals.shape[0] == data.N else data)
    N, D = R.shape
    if N < 2:
        warnings.warn("sandwich covariance from a single object has rank one", stacklevel=2)
    A_pinv = np.kron(centering_matrix(D), sym_pseudo_inverse(X.T @ X))
    M = kernels.meat_sum(R, X)
    V = A_pinv @ M @ A_pinv
    P = _constraint_projector(fit.coefficients.constraint, D, X.shape[1])
    return CoefficientCovariance(P @ V @ P.T, "sandwich", fit.coefficients.constraint, D)


def null_space_basis(D, q):
    """Columns ``1_D kron e_r``: the directions along which B is not identified."""
    return np.kron(np.ones((D, 1)), np.eye(q))


def is_identifiable(contrast, D, q, tol=1e-8):
    a = np.asarray(contrast, dtype=float)
    return bool(np.max(np.abs(null_space_basis(D, q).T @ a)) <= tol * max(1.0, np.max(np.abs(a))))


def wald(contrast, estimate_vec, vcov):
    """Wald statistic for the linear combination ``contrast . beta``.

    A contrast orthogonal to the common-shift directions is used as is.
    Otherwise it is read as a function of the constrained parameters (for
    example a single coefficient under sum-to-zero); if that function is
    identically zero, nothing is identified and an
    :class:`IdentifiabilityError` is raised.
    """
    a = np.asarray(contrast, dtype=float).reshape(-1)
    beta = np.asarray(estimate_vec, dtype=float).reshape(-1)
    V = vcov.matrix
    D = vcov.n_parts
    q = a.size // D
    if not is_identifiable(a, D, q):
        effective = _constraint_projector(vcov.constraint, D, q).T @ a
        if np.max(np.abs(effective)) <= 1e-8 * max(1.0, np.max(np.abs(a))):
            raise IdentifiabilityError("contrast lies in the unidentified common-shift direction")
    est = float(a @ beta)
    se = math.sqrt(max(float(a @ V @ a), 0.0))
    z = est / se if se > 0 else math.nan
    return WaldTest(a, est, se, z)


def coefficient_table(fit, data, dispersion=None):
    """Rows of (part, covariate, estimate, se_model, se_sandwich, z_model)."""
    mv = fit_vcov(fit, data, dispersion)
    sw = sandwich_vcov(fit, data)
    beta = fit.coefficients.vector
    se_m, se_s = mv.std_errors, sw.std_errors
    cols = ["(intercept)"] + list(data.covariate_names)
    rows = []
    for k, part in enumerate(data.part_names):
        for r, cov in enumerate(cols):
            j = k * len(cols) + r
            z = beta[j] / se_m[j] if se_m[j] > 0 else math.nan
            rows.append((part, cov, beta[j], se_m[j], se_s[j], z))
    return rows
