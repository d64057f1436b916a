"""Quasi-likelihood logit regression for compositional data under multiplicative error."""

from .inference import (
    CoefficientCovariance,
    WaldTest,
    estimate_centered_dispersion,
    fit_vcov,
    model_vcov,
    sandwich_vcov,
    standardized_residuals,
    wald,
)
from .kernels import BACKEND
from .linalg import centering_matrix, kron, sym_pseudo_inverse
from .model import (
    SUM_TO_ZERO,
    CoefficientMatrix,
    Composition,
    CompositionalDataset,
    IdentificationConstraint,
    MeasurementRecord,
    apply_constraint,
    logit_probabilities,
    model_jacobian,
)
from .solver import (
    FitResult,
    SolverConfig,
    fit,
    fit_fisher_scoring,
    fit_gamma_trick,
    quasi_information,
    quasi_score,
    quasi_score_general,
)
from .variance import (
    CenteredDispersion,
    ErrorDispersion,
    multinomial_pinv,
    stabilize,
    wedderburn_cov,
)

__version__ = "0.1.0"
