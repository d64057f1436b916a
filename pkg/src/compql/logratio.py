"""Additive log-ratio multivariate linear model, the comparison baseline.

Fits ``E[log(p_ik / p_i,ref)] = x_i'(beta_k - beta_ref)`` by ordinary least
squares on every log-ratio column.  Zeros make the log-ratios undefined;
``zero_adjust`` adds a constant to the raw measurements first, purely to
show how much the answer depends on that constant.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InsufficientDataError, ZerosUnsupportedError
from .solver import check_design


@dataclass(frozen=True)
class LogRatioFit:
    reference_part: int
    coefficients: np.ndarray  # (D-1) x (p+1), rows in part order with the reference removed
    residual_covariance: np.ndarray

    @property
    def D(self):
        return self.coefficients.shape[0] + 1

    def full_coefficients(self):
        """D x (p+1) matrix with a zero row at the reference part."""
        return np.insert(self.coefficients, self.reference_part, 0.0, axis=0)


def alr_transform(p, ref):
    """``log(p_k / p_ref)`` for ``k != ref``; works row-wise on 2-d input."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ZerosUnsupportedError("log-ratios are undefined for zero parts")
    L = np.log(p)
    out = L - L[..., ref : ref + 1]
    return np.delete(out, ref, axis=-1)


def alr_inverse(z, ref):
    z = np.asarray(z, dtype=float)
    full = np.insert(z, ref, 0.0, axis=-1)
    return kernels.softmax_rows(np.atleast_2d(full)).reshape(full.shape)


def zero_adjusted(data, eps):
    """Dataset with ``eps`` added to every raw measurement (then re-closed)."""
    from .model import CompositionalDataset

    return CompositionalDataset(
        np.asarray(data.raw) + eps, data.covariates, data.part_names, data.covariate_names
    )


def fit_logratio_lm(data, ref=None, zero_adjust=None):
    """Multivariate OLS of additive log-ratios on the design.

    Parameters
    ----------
    data : CompositionalDataset
    ref : int, optional
        Reference part; defaults to the last part.
    zero_adjust : float, optional
        Constant added to all raw measurements before closing.  Never
        applied unless requested.

    Raises
    ------
    ZerosUnsupportedError
        If any part is zero and no adjustment was requested.
    """
    if zero_adjust is not None:
        data = zero_adjusted(data, zero_adjust)
    ref = data.D - 1 if ref is None else int(ref)
    X = data.design_matrix()
    N, q = X.shape
    if N <= q:
        raise InsufficientDataError(f"need more than {q} objects for the log-ratio model, got {N}")
    check_design(X, ["(intercept)"] + list(data.covariate_names))
    Z = alr_transform(data.compositions, ref)
    coef, *_ = np.linalg.lstsq(X, Z, rcond=None)
    E = Z - X @ coef
    S = E.T @ E / (N - q)
    return LogRatioFit(ref, coef.T, 0.5 * (S + S.T))


def predict_logratio(fit, x):
    """Composition(s) implied by the log-ratio fit at covariates ``x`` (no leading 1)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1 and fit.coefficients.shape[1] - 1 == x.size
    xt = np.atleast_2d(x).reshape(-1, fit.coefficients.shape[1] - 1)
    xt = np.column_stack([np.ones(xt.shape[0]), xt])
    pi = alr_inverse(xt @ fit.coefficients.T, fit.reference_part)
    return pi[0] if single else pi
