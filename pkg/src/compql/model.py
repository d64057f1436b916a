"""Compositions, datasets and the compositional logit model.

The model for object ``i`` is

    pi_ik = exp(x_i' beta_k) / sum_l exp(x_i' beta_l),

with ``x_i = (1, x_i1, ..., x_ip)``.  The coefficient matrix ``B`` has one
row per part and is identified only up to a common row shift, so every
``CoefficientMatrix`` carries an :class:`IdentificationConstraint`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    ConfigError,
    DataError,
    DegenerateProbabilityError,
    InvalidDimensionError,
    NumericOverflowError,
)

UNIT_SUM_TOL = 1e-10


@dataclass(frozen=True)
class Composition:
    """A nonnegative unit-sum vector with at least two parts."""

    parts: np.ndarray

    def __post_init__(self):
        parts = np.array(self.parts, dtype=float)
        if parts.ndim != 1 or parts.size < 2:
            raise InvalidDimensionError("a composition needs a 1-d vector of at least 2 parts")
        if not np.all(np.isfinite(parts)) or np.any(parts < 0):
            raise DataError("composition parts must be finite and nonnegative")
        if abs(parts.sum() - 1.0) > UNIT_SUM_TOL:
            raise DataError(f"composition does not sum to 1 (sum = {parts.sum()!r})")
        parts.setflags(write=False)
        object.__setattr__(self, "parts", parts)

    @classmethod
    def from_amounts(cls, amounts):
        amounts = np.asarray(amounts, dtype=float)
        total = amounts.sum()
        if not total > 0:
            raise DataError("amounts must have a positive total")
        return cls(amounts / total)

    def __len__(self):
        return self.parts.size

    def __array__(self, dtype=None, copy=None):
        return self.parts if dtype is None else self.parts.astype(dtype)


@dataclass(frozen=True)
class MeasurementRecord:
    raw: np.ndarray
    total: float
    composition: Composition
    covariates: np.ndarray


@dataclass(frozen=True)
class CompositionalDataset:
    """N objects measured on D parts, each with p covariates.

    Stored column-wise: ``raw`` is N x D, ``covariates`` is N x p.  Totals and
    compositions are derived from ``raw`` at construction.
    """

    raw: np.ndarray
    covariates: np.ndarray
    part_names: tuple = ()
    covariate_names: tuple = ()
    totals: np.ndarray = field(init=False, repr=False)
    compositions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        raw = np.array(self.raw, dtype=float)
        if raw.ndim != 2:
            raise InvalidDimensionError("raw measurements must be an N x D array")
        N, D = raw.shape
        if N < 1:
            raise DataError("dataset has no records")
        if D < 2:
            raise InvalidDimensionError("a composition needs at least 2 parts")
        cov = np.array(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(N, -1) if cov.size else np.zeros((N, 0))
        if cov.shape[0] != N:
            raise InvalidDimensionError(
                f"covariates have {cov.shape[0]} rows but there are {N} records"
            )
        if not np.all(np.isfinite(raw)):
            raise DataError("raw measurements must be finite")
        if not np.all(np.isfinite(cov)):
            raise DataError("covariates must be finite")
        bad = np.flatnonzero(np.any(raw < 0, axis=1))
        if bad.size:
            raise DataError(f"negative measurement in record {bad[0]}")
        totals = raw.sum(axis=1)
        bad = np.flatnonzero(totals <= 0)
        if bad.size:
            raise DataError(f"record {bad[0]} has zero total")
        comps = raw / totals[:, None]
        names = tuple(self.part_names) or tuple(f"part{k + 1}" for k in range(D))
        cnames = tuple(self.covariate_names) or tuple(f"x{r + 1}" for r in range(cov.shape[1]))
        if len(names) != D or len(cnames) != cov.shape[1]:
            raise ConfigError("number of names does not match the data")
        for name, arr in (("raw", raw), ("covariates", cov), ("totals", totals), ("compositions", comps)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "part_names", names)
        object.__setattr__(self, "covariate_names", cnames)

    @classmethod
    def from_compositions(cls, compositions, covariates, **names):
        return cls(np.asarray(compositions, dtype=float), covariates, **names)

    @property
    def N(self):
        return self.raw.shape[0]

    @property
    def D(self):
        return self.raw.shape[1]

    @property
    def p(self):
        return self.covariates.shape[1]

    def design_matrix(self):
        """N x (p+1) matrix with a leading column of ones."""
        return np.column_stack([np.ones(self.N), self.covariates])

    @property
    def records(self):
        return [self[i] for i in range(self.N)]

    def __len__(self):
        return self.N

    def __getitem__(self, i):
        return MeasurementRecord(
            raw=self.raw[i],
            total=float(self.totals[i]),
            composition=Composition(self.compositions[i]),
            covariates=self.covariates[i],
        )

    def rescaled(self, factors):
        """Copy with each object's raw measurements multiplied by ``factors[i]``."""
        factors = np.asarray(factors, dtype=float).reshape(-1, 1)
        return CompositionalDataset(
            self.raw * factors, self.covariates, self.part_names, self.covariate_names
        )


@dataclass(frozen=True)
class IdentificationConstraint:
    """Linear constraint ``c'B = 0`` fixing the common row shift of ``B``.

    ``kind`` is ``"sum_to_zero"`` (c = 1/D each) or ``"reference_part"``
    (c = e_index, so row ``index`` of B is zero).  Weights sum to one.
    """

    kind: str = "sum_to_zero"
    index: int = 0

    def __post_init__(self):
        if self.kind not in ("sum_to_zero", "reference_part"):
            raise ConfigError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def reference(cls, index):
        return cls("reference_part", int(index))

    def weights(self, D):
        if self.kind == "sum_to_zero":
            return np.full(D, 1.0 / D)
        if not 0 <= self.index < D:
            raise ConfigError(f"reference part {self.index} out of range for D = {D}")
        c = np.zeros(D)
        c[self.index] = 1.0
        return c

    def projector(self, D):
        """``I - 1 c'``: maps any row-shifted B onto the constrained representative."""
        return np.eye(D) - np.outer(np.ones(D), self.weights(D))


SUM_TO_ZERO = IdentificationConstraint()


@dataclass(frozen=True)
class CoefficientMatrix:
    """D x (p+1) logit coefficients; row k is beta_k, column 0 the intercept."""

    B: np.ndarray
    constraint: IdentificationConstraint = SUM_TO_ZERO

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 2:
            raise InvalidDimensionError("coefficient matrix must be 2-d")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @property
    def D(self):
        return self.B.shape[0]

    @property
    def p(self):
        return self.B.shape[1] - 1

    @property
    def vector(self):
        """Part-major flattening: entry ``k*(p+1) + r`` is ``B[k, r]``."""
        return self.B.reshape(-1)

    def constraint_residual(self):
        return float(np.max(np.abs(self.constraint.weights(self.D) @ self.B)))

    def with_constraint(self, constraint):
        return apply_constraint(self.B, constraint)


def _as_B(B):
    return B.B if isinstance(B, CoefficientMatrix) else np.asarray(B, dtype=float)


def _with_intercept(x, p):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != p:
        raise InvalidDimensionError(f"expected {p} covariates, got {x.shape[-1]}")
    ones = np.ones(x.shape[:-1] + (1,))
    return np.concatenate([ones, x], axis=-1)


def logit_probabilities(B, x):
    """Compositional logit probabilities at covariate vector(s) ``x``.

    Parameters
    ----------
    B : CoefficientMatrix or array of shape (D, p+1)
    x : array_like of shape (p,) or (n, p)
        Covariates without the leading 1.

    Returns
    -------
    ndarray of shape (D,) or (n, D)
        Strictly positive unit-sum rows.
    """
    Bm = _as_B(B)
    xt = _with_intercept(x, Bm.shape[1] - 1)
    eta = np.atleast_2d(xt) @ Bm.T
    if not np.all(np.isfinite(eta)):
        raise NumericOverflowError("non-finite linear predictor")
    pi = kernels.softmax_rows(eta)
    if not np.all(np.isfinite(pi)):
        raise NumericOverflowError("softmax overflow")
    return pi[0] if xt.ndim == 1 else pi


def apply_constraint(B_raw, constraint=SUM_TO_ZERO):
    """Shift every row of ``B_raw`` by a common vector so that ``c'B = 0``.

    The fitted probabilities are unchanged because the softmax is invariant
    to a common shift of the linear predictors.
    """
    B_raw = _as_B(B_raw)
    c = constraint.weights(B_raw.shape[0])
    return CoefficientMatrix(B_raw - np.outer(np.ones(B_raw.shape[0]), c @ B_raw), constraint)


def multinomial_cov(pi):
    pi = np.asarray(pi, dtype=float)
    return np.diag(pi) - np.outer(pi, pi)


def expand_covariates(x, D):
    """``I_D kron x'``: the D x D(p+1) per-object design, ``x`` including the leading 1."""
    return np.kron(np.eye(D), np.asarray(x, dtype=float).reshape(1, -1))


def model_jacobian(pi, x):
    """Derivative of pi with respect to the part-major coefficient vector.

    Returns ``(Pi - pi pi') (I kron x')``, a D x D(p+1) matrix; ``x`` excludes
    the leading 1.
    """
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0):
        raise DegenerateProbabilityError("model_jacobian needs strictly positive probabilities")
    xt = _with_intercept(x, np.size(x))
    return multinomial_cov(pi) @ expand_covariates(xt, pi.size)
