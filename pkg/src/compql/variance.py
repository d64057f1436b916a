"""Generalized Wedderburn variance-covariance function and its pseudo-inverse.

Under ``Y_i = tau_i diag(pi_i) U_i`` with ``cov(U_i) = Phi``, the
compositional error ``(Y_i - T_i pi_i) / tau_i`` has covariance

    V(pi; Phi) = (Pi - pi pi') Phi (Pi - pi pi').

The pseudo-inverse of ``Pi - pi pi'`` has the closed form ``C Pi^-1 C``, and
sandwiching ``V`` between two copies of it returns ``C Phi C`` whatever the
value of ``pi``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DegenerateProbabilityError, InvalidDimensionError
from .linalg import centering_matrix, check_symmetric, sym_eig
from .model import multinomial_cov

PSD_TOL = 1e-9


def _check_psd(M, what):
    vals = sym_eig(M).eigenvalues
    if vals.size and vals[-1] < -PSD_TOL * max(abs(vals[0]), 1e-300):
        raise ContractViolationError(f"{what} is not positive semidefinite (min eigenvalue {vals[-1]:.3g})")


@dataclass(frozen=True)
class ErrorDispersion:
    """Covariance matrix ``Phi`` of the unit-mean relative errors."""

    Phi: np.ndarray

    def __post_init__(self):
        Phi = check_symmetric(np.array(self.Phi, dtype=float))
        _check_psd(Phi, "Phi")
        Phi.setflags(write=False)
        object.__setattr__(self, "Phi", Phi)

    @property
    def D(self):
        return self.Phi.shape[0]

    def centered(self):
        C = centering_matrix(self.D)
        return CenteredDispersion(C @ self.Phi @ C, provenance="assumed")


@dataclass(frozen=True)
class CenteredDispersion:
    """Estimate (or assumed value) of ``C Phi C``; rows and columns sum to zero.

    ``provenance`` is ``"assumed"`` or ``"estimated"``; estimated values carry
    their residual degrees of freedom in ``df``.
    """

    matrix: np.ndarray
    provenance: str = "assumed"
    df: float = None

    def __post_init__(self):
        M = check_symmetric(np.array(self.matrix, dtype=float))
        M = 0.5 * (M + M.T)
        scale = max(np.max(np.abs(M)), 1.0) if M.size else 1.0
        if np.max(np.abs(M.sum(axis=1))) > 1e-9 * scale:
            raise ContractViolationError("centered dispersion must have zero row sums")
        _check_psd(M, "centered dispersion")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def D(self):
        return self.matrix.shape[0]


def _phi_matrix(Phi):
    if isinstance(Phi, ErrorDispersion):
        return Phi.Phi
    return np.asarray(Phi, dtype=float)


def _positive(pi):
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0):
        raise DegenerateProbabilityError("closed-form pseudo-inverse needs every part > 0")
    return pi


def wedderburn_cov(pi, Phi):
    """``(Pi - pi pi') Phi (Pi - pi pi')``; zeros in ``pi`` are allowed."""
    pi = np.asarray(pi, dtype=float)
    Phi = _phi_matrix(Phi)
    if Phi.shape != (pi.size, pi.size):
        raise InvalidDimensionError(f"Phi has shape {Phi.shape}, expected {(pi.size, pi.size)}")
    M = multinomial_cov(pi)
    V = M @ Phi @ M
    return 0.5 * (V + V.T)


def multinomial_pinv(pi):
    """``C diag(pi)^-1 C``, the Moore-Penrose inverse of ``diag(pi) - pi pi'``."""
    pi = _positive(pi)
    C = centering_matrix(pi.size)
    return (C / pi) @ C


def stabilize(pi, V):
    """``(C Pi^-1 C) V (C Pi^-1 C)``; equals ``C Phi C`` when ``V = wedderburn_cov(pi, Phi)``."""
    G = multinomial_pinv(pi)
    V = np.asarray(V, dtype=float)
    if V.shape != G.shape:
        raise InvalidDimensionError(f"V has shape {V.shape}, expected {G.shape}")
    S = G @ V @ G
    return 0.5 * (S + S.T)
