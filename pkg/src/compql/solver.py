"""Quasi-likelihood fitting of the compositional logit model.

The estimating equations are

    sum_i X_i' C diag(pi_i)^-1 (p_i - pi_i) = 0,        X_i = I_D kron x_i',

which do not involve the error dispersion ``Phi``.  Two solvers are
provided.  :func:`fit_gamma_trick` alternates a unit-total normalisation of
per-object offsets with a gamma log-linear scoring step, using nothing but
ordinary least squares on each part.  :func:`fit_fisher_scoring` takes
Newton-type steps with the (parameter-free) quasi-information.  Both reach
the same fixed point.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, ConvergenceError, RankDeficiencyError
from .linalg import centering_matrix, numerical_rank, sym_pseudo_inverse
from .model import SUM_TO_ZERO, CoefficientMatrix, apply_constraint
from .variance import ErrorDispersion

METHODS = ("gamma_trick", "fisher_scoring", "both_crosscheck")
SEPARATION_CAP = 30.0


class SeparationWarning(UserWarning):
    """A part is zero in every object; its coefficients are held at a finite cap."""


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    score_tolerance: float = 1e-8
    step_tolerance: float = 1e-8
    method: str = "gamma_trick"
    step_halving_max: int = 20
    raise_on_failure: bool = True
    crosscheck_tolerance: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.max_iterations < 1 or self.step_halving_max < 0:
            raise ConfigError("max_iterations must be >= 1 and step_halving_max >= 0")
        if not (self.score_tolerance > 0 and self.step_tolerance > 0):
            raise ConfigError("tolerances must be positive")


@dataclass(frozen=True)
class FitResult:
    coefficients: CoefficientMatrix
    fitted: np.ndarray  # N x D fitted compositions
    residuals: np.ndarray  # N x D standardized residuals
    iterations: int
    final_score_norm: float
    converged: bool
    method_used: str
    trace: list = field(default_factory=list, repr=False)
    separated_parts: tuple = ()
    crosscheck_difference: float = None

    @property
    def B(self):
        return self.coefficients.B

    @property
    def fitted_compositions(self):
        return self.fitted


def _design(data):
    return data.design_matrix(), np.asarray(data.compositions)


def check_design(X, names=None):
    """Raise :class:`RankDeficiencyError` if the design has collinear columns."""
    q = X.shape[1]
    names = list(names) if names is not None else [f"column{r}" for r in range(q)]
    if numerical_rank(X.T @ X) == q:
        return
    collinear, kept = [], []
    for r in range(q):
        trial = X[:, kept + [r]]
        if numerical_rank(trial.T @ trial) == len(kept) + 1:
            kept.append(r)
        else:
            collinear.append(names[r])
    raise RankDeficiencyError(
        "design matrix is rank deficient; collinear columns: " + ", ".join(collinear),
        columns=collinear,
    )


def _column_names(data):
    return ["(intercept)"] + list(data.covariate_names)


def quasi_score(B, data):
    """Quasi-score ``sum_i X_i' C Pi_i^-1 (p_i - pi_i)`` as a part-major vector."""
    X, P = _design(data)
    Bm = B.B if isinstance(B, CoefficientMatrix) else np.asarray(B, dtype=float)
    _, _, S = kernels.score_terms(P, X, Bm)
    return S.reshape(-1)


def quasi_score_general(B, data, Phi):
    """Quasi-score with the full weight ``C (C Phi C)^+ C`` for a given ``Phi``."""
    Phi = Phi if isinstance(Phi, ErrorDispersion) else ErrorDispersion(Phi)
    X, P = _design(data)
    Bm = B.B if isinstance(B, CoefficientMatrix) else np.asarray(B, dtype=float)
    _, _, S = kernels.score_terms(P, X, Bm)
    C = centering_matrix(data.D)
    W = C @ sym_pseudo_inverse(C @ Phi.Phi @ C) @ C
    return (W @ S).reshape(-1)


def _per_object_weights(Pi):
    """``D_i' V_i^+ D_i`` factors: ``M_i G_i C G_i M_i`` with ``M = Pi - pi pi'``, ``G = C Pi^-1 C``."""
    N, D = Pi.shape
    C = centering_matrix(D)
    M = Pi[:, :, None] * np.eye(D) - Pi[:, :, None] * Pi[:, None, :]
    G = np.einsum("kl,il,lm->ikm", C, 1.0 / Pi, C)
    MG = M @ G
    return MG @ C @ np.transpose(MG, (0, 2, 1))


def quasi_information(B, data):
    """Quasi-information ``sum_i D_i' V_i^+ D_i`` assembled object by object.

    Each factor depends on the fitted compositions at ``B`` but the sum does
    not: it equals ``C kron X'X``.
    """
    X, _ = _design(data)
    Bm = B.B if isinstance(B, CoefficientMatrix) else np.asarray(B, dtype=float)
    Pi = kernels.softmax_rows(X @ Bm.T)
    return kernels.info_sum(_per_object_weights(Pi), X)


def _prepare(data, B_init, constraint):
    X, P = _design(data)
    check_design(X, _column_names(data))
    q = X.shape[1]
    if data.N <= q:
        warnings.warn(f"only {data.N} objects for {q} coefficients per part", stacklevel=4)
    if constraint is None:
        constraint = B_init.constraint if isinstance(B_init, CoefficientMatrix) else SUM_TO_ZERO
    if B_init is None:
        B0 = np.zeros((data.D, q))
    else:
        B0 = np.array(B_init.B if isinstance(B_init, CoefficientMatrix) else B_init, dtype=float)
        if B0.shape != (data.D, q):
            raise ConfigError(f"B_init has shape {B0.shape}, expected {(data.D, q)}")
    separated = tuple(int(k) for k in np.flatnonzero(np.all(P == 0, axis=0)))
    if separated:
        warnings.warn(
            "parts observed as zero in every object: "
            + ", ".join(data.part_names[k] for k in separated)
            + f"; their linear predictors are held {SEPARATION_CAP:g} below the rest",
            SeparationWarning,
            stacklevel=4,
        )
    return X, P, apply_constraint(B0, constraint).B, constraint, separated


def _finish(data, B, constraint, config, method, trace, separated, iterations, converged, score_norm):
    X, P = _design(data)
    Pi, R, _ = kernels.score_terms(P, X, B)
    if not converged and config.raise_on_failure:
        raise ConvergenceError(
            f"{method} did not converge in {config.max_iterations} iterations "
            f"(score norm {score_norm:.3g})",
            trace=trace,
        )
    return FitResult(
        coefficients=CoefficientMatrix(B, constraint),
        fitted=Pi,
        residuals=R,
        iterations=iterations,
        final_score_norm=score_norm,
        converged=converged,
        method_used=method,
        trace=trace,
        separated_parts=separated,
    )


def _solve(core, method, data, config, B_init, constraint):
    """Run ``core`` on the parts that are ever nonzero, then restore the rest.

    A part that is zero in every object has no finite estimate.  The
    remaining parts are fitted as a smaller composition (they still sum to
    one), and each separated part gets the mean row of the others with the
    intercept lowered by ``SEPARATION_CAP``.
    """
    config = config or SolverConfig()
    X, P, B0, constraint, separated = _prepare(data, B_init, constraint)
    if not separated:
        B, trace, it, converged, norm = core(X, P, B0, constraint, config)
        return _finish(data, B, constraint, config, method, trace, (), it, converged, norm)
    keep = [k for k in range(data.D) if k not in separated]
    if len(keep) < 2:
        raise ConfigError("fewer than two parts are ever nonzero")
    sub0 = apply_constraint(B0[keep], SUM_TO_ZERO).B
    B, trace, it, converged, norm = core(X, P[:, keep], sub0, SUM_TO_ZERO, config)
    full = np.empty_like(B0)
    full[keep] = B
    anchor = B.mean(axis=0)
    anchor[0] -= SEPARATION_CAP
    full[list(separated)] = anchor
    B = apply_constraint(full, constraint).B
    return _finish(data, B, constraint, config, method, trace, separated, it, converged, norm)


def _score_norm(S):
    return float(np.max(np.abs(S))) if S.size else 0.0


def _gamma_core(X, P, B, constraint, config):
    XtX = X.T @ X
    trace = []
    converged = False
    score_norm = math.inf
    it = 0
    for it in range(1, config.max_iterations + 1):
        eta = X @ B.T
        m = eta.max(axis=1, keepdims=True)
        alpha = -(m + np.log(np.exp(eta - m).sum(axis=1, keepdims=True)))
        mu = np.exp(alpha + eta)
        z = eta + P / mu - 1.0
        B_new = apply_constraint(np.linalg.solve(XtX, X.T @ z).T, constraint).B
        step = float(np.max(np.abs(B_new - B)))
        B = B_new
        _, _, S = kernels.score_terms(P, X, B)
        score_norm = _score_norm(S)
        trace.append((it, score_norm, step))
        if score_norm <= config.score_tolerance and step <= config.step_tolerance:
            converged = True
            break
    return B, trace, it, converged, score_norm


def _scoring_core(X, P, B, constraint, config):
    D, q = B.shape
    A = kernels.info_sum(_per_object_weights(kernels.softmax_rows(X @ B.T)), X)
    if numerical_rank(A) < (D - 1) * q:
        raise RankDeficiencyError("quasi-information is rank deficient")
    A_pinv = sym_pseudo_inverse(A)
    _, _, S = kernels.score_terms(P, X, B)
    score_norm = _score_norm(S)
    trace = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        delta = (A_pinv @ S.reshape(-1)).reshape(D, q)
        scale = 1.0
        for _ in range(config.step_halving_max + 1):
            B_try = apply_constraint(B + scale * delta, constraint).B
            _, _, S_try = kernels.score_terms(P, X, B_try)
            norm_try = _score_norm(S_try)
            if norm_try <= score_norm or norm_try <= config.score_tolerance:
                break
            scale *= 0.5
        step = float(np.max(np.abs(B_try - B)))
        B, S, score_norm = B_try, S_try, norm_try
        trace.append((it, score_norm, step))
        if score_norm <= config.score_tolerance and step <= config.step_tolerance:
            converged = True
            break
    return B, trace, it, converged, score_norm


def fit_gamma_trick(data, config=None, B_init=None, constraint=None):
    """Solve the quasi-likelihood equations through gamma log-linear steps.

    Each iteration sets the per-object offsets ``alpha_i`` so that fitted
    totals are one, then regresses the gamma working response
    ``x_i' beta_k + p_ik / mu_ik - 1`` on the design, separately for every
    part (unit working weights under the gamma log link).

    Parameters
    ----------
    data : CompositionalDataset
    config : SolverConfig, optional
    B_init : CoefficientMatrix or array, optional
        Starting values; zero (uniform compositions) by default.
    constraint : IdentificationConstraint, optional
        Defaults to the constraint on ``B_init``, else sum-to-zero.

    Returns
    -------
    FitResult
    """
    return _solve(_gamma_core, "gamma_trick", data, config, B_init, constraint)


def fit_fisher_scoring(data, config=None, B_init=None, constraint=None):
    """Fisher scoring with the quasi-information, with step halving.

    The quasi-information is assembled once at the starting value; it does
    not depend on the coefficients, so this is exact rather than a
    quasi-Newton approximation.

    Raises
    ------
    RankDeficiencyError
        If the design matrix has collinear columns.
    """
    return _solve(_scoring_core, "fisher_scoring", data, config, B_init, constraint)


def fit(data, config=None, B_init=None, constraint=None):
    """Fit by ``config.method``; ``both_crosscheck`` runs both solvers and compares them."""
    config = config or SolverConfig()
    if config.method == "gamma_trick":
        return fit_gamma_trick(data, config, B_init, constraint)
    if config.method == "fisher_scoring":
        return fit_fisher_scoring(data, config, B_init, constraint)
    g = fit_gamma_trick(data, config, B_init, constraint)
    f = fit_fisher_scoring(data, config, B_init, constraint)
    diff = float(np.max(np.abs(g.B - f.B)))
    if diff > config.crosscheck_tolerance:
        raise ConvergenceError(f"solvers disagree: max |B_gamma - B_scoring| = {diff:.3g}")
    return FitResult(
        coefficients=g.coefficients,
        fitted=g.fitted,
        residuals=g.residuals,
        iterations=max(g.iterations, f.iterations),
        final_score_norm=max(g.final_score_norm, f.final_score_norm),
        converged=g.converged and f.converged,
        method_used="both_crosscheck",
        trace=g.trace,
        separated_parts=g.separated_parts,
        crosscheck_difference=diff,
    )
