import numpy as np
import pytest

from compql.errors import ContractViolationError, DegenerateProbabilityError, InvalidDimensionError
from compql.linalg import centering_matrix, sym_pseudo_inverse
from compql.model import multinomial_cov
from compql.variance import CenteredDispersion, ErrorDispersion, multinomial_pinv, stabilize, wedderburn_cov

from conftest import random_psd


def test_wedderburn_examples():
    np.testing.assert_allclose(wedderburn_cov([0.5, 0.5], np.eye(2)), [[0.125, -0.125], [-0.125, 0.125]])
    np.testing.assert_allclose(wedderburn_cov(np.full(3, 1 / 3), np.eye(3)), centering_matrix(3) / 9, atol=1e-16)
    np.testing.assert_array_equal(wedderburn_cov([1.0, 0.0, 0.0], random_psd(np.random.default_rng(1), 3)), 0)


def test_wedderburn_dimension_mismatch():
    with pytest.raises(InvalidDimensionError):
        wedderburn_cov([0.5, 0.5], np.eye(3))


def test_pinv_examples():
    np.testing.assert_allclose(multinomial_pinv([0.5, 0.5]), [[1, -1], [-1, 1]])
    np.testing.assert_allclose(multinomial_pinv(np.full(3, 1 / 3)), 3 * centering_matrix(3), atol=1e-15)
    with pytest.raises(DegenerateProbabilityError):
        multinomial_pinv([1.0, 0.0])


def test_stabilize_examples(rng):
    pi = [0.5, 0.5]
    np.testing.assert_allclose(stabilize(pi, wedderburn_cov(pi, np.eye(2))), centering_matrix(2), atol=1e-15)
    pi = rng.dirichlet(np.ones(4))
    np.testing.assert_array_equal(stabilize(pi, wedderburn_cov(pi, np.zeros((4, 4)))), 0)
    with pytest.raises(DegenerateProbabilityError):
        stabilize([0.0, 1.0], np.zeros((2, 2)))


@pytest.mark.parametrize("D", range(2, 7))
def test_pinv_matches_generic_pseudo_inverse(rng, D):
    for _ in range(30):
        pi = rng.dirichlet(np.ones(D))
        M = multinomial_cov(pi)
        G = multinomial_pinv(pi)
        np.testing.assert_allclose(M @ G @ M, M, atol=1e-10)
        np.testing.assert_allclose(M @ G, centering_matrix(D), atol=1e-10)
        ref = sym_pseudo_inverse(M)
        np.testing.assert_allclose(G, ref, atol=1e-9 * np.abs(ref).max())


def test_wedderburn_properties(rng):
    for _ in range(200):
        D = rng.integers(2, 7)
        pi = rng.dirichlet(np.ones(D))
        V = wedderburn_cov(pi, random_psd(rng, D))
        np.testing.assert_allclose(V, V.T, atol=0)
        np.testing.assert_allclose(V.sum(axis=1), 0, atol=1e-15)
        assert np.linalg.eigvalsh(V).min() > -1e-14


def test_error_dispersion_contracts():
    with pytest.raises(ContractViolationError):
        ErrorDispersion([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(ContractViolationError):
        ErrorDispersion([[1.0, 0.5], [0.0, 1.0]])
    c = ErrorDispersion(np.eye(3)).centered()
    np.testing.assert_allclose(c.matrix, centering_matrix(3), atol=1e-15)
    assert c.provenance == "assumed"


def test_centered_dispersion_requires_zero_row_sums():
    with pytest.raises(ContractViolationError):
        CenteredDispersion(np.eye(2))
    CenteredDispersion(centering_matrix(4))
