import numpy as np
import pytest

from compql.errors import ConfigError, DegenerateProbabilityError, ZerosUnsupportedError
from compql.linalg import centering_matrix, sym_pseudo_inverse
from compql.model import CompositionalDataset
from compql.multivariate import (
    aitchison_distance_matrix,
    compositional_residuals,
    distance_matrix,
    null_correlation_diagnostic,
    null_correlation_test,
)
from compql.variance import CenteredDispersion


def comps(P):
    P = np.asarray(P, dtype=float)
    return CompositionalDataset(P, np.zeros((len(P), 0)))


def test_residuals_hand_example():
    R = compositional_residuals(comps([[0.6, 0.4], [0.4, 0.6]]))
    np.testing.assert_allclose(R, [[0.2, -0.2], [-0.2, 0.2]], atol=1e-15)


def test_residuals_equal_rows_and_zeros(rng):
    np.testing.assert_allclose(compositional_residuals(comps([[0.2, 0.8]] * 3)), 0, atol=1e-15)
    P = rng.dirichlet(np.ones(4), size=20)
    P[3] = [0.5, 0.5, 0, 0]
    R = compositional_residuals(comps(P))
    assert np.all(np.isfinite(R))
    np.testing.assert_allclose(R.sum(axis=1), 0, atol=1e-10)
    P[:, 3] = 0
    P /= P.sum(axis=1, keepdims=True)
    with pytest.raises(DegenerateProbabilityError):
        compositional_residuals(comps(P))


def test_identity_distance_hand_example():
    R = np.array([[0.2, -0.2], [0.0, 0.0]])
    d = distance_matrix(R, "identity", squared=True)
    assert d.entries[0, 1] == pytest.approx(0.08)


def test_mahalanobis_with_centering_dispersion(rng):
    R = rng.normal(size=(6, 2))
    R -= R.mean(axis=1, keepdims=True)
    C = centering_matrix(2)
    d = distance_matrix(R, "mahalanobis_phi", CenteredDispersion(C), squared=True).entries
    W = sym_pseudo_inverse(C)
    for i in range(6):
        for j in range(6):
            diff = R[i] - R[j]
            assert abs(d[i, j] - diff @ W @ diff) < 1e-12
            assert abs(d[i, j] - diff @ C @ diff) < 1e-12


def test_distance_matrix_properties(rng):
    P = rng.dirichlet(np.ones(4), size=15)
    R = compositional_residuals(comps(P))
    S = CenteredDispersion(R.T @ R / 14)
    for kind, disp in (("identity", None), ("mahalanobis_phi", S)):
        d = distance_matrix(R, kind, disp).entries
        np.testing.assert_array_equal(d, d.T)
        assert np.all(np.diag(d) == 0) and np.all(d >= 0) and np.all(np.isfinite(d))


def test_mahalanobis_scale_invariance(rng):
    R = compositional_residuals(comps(rng.dirichlet(np.ones(3), size=12)))
    S = R.T @ R / 11
    c = 3.7
    a = distance_matrix(R, "mahalanobis_phi", S).entries
    b = distance_matrix(R * np.sqrt(c), "mahalanobis_phi", S * c).entries
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_distance_errors():
    with pytest.raises(ConfigError):
        distance_matrix(np.zeros((3, 2)), "mahalanobis_phi")
    with pytest.raises(ConfigError):
        distance_matrix(np.zeros((3, 2)), "euclid")


def test_aitchison_zero_and_identical():
    d = aitchison_distance_matrix(comps([[0.2, 0.3, 0.5]] * 3))
    np.testing.assert_allclose(d.entries, 0, atol=1e-15)
    with pytest.raises(ZerosUnsupportedError):
        aitchison_distance_matrix(comps([[0.2, 0.8, 0.0], [0.3, 0.3, 0.4]]))


def test_aitchison_near_barycenter_agrees_with_identity(rng):
    for D in (3, 5):
        P = 1 / D + 1e-3 * rng.uniform(-1, 1, size=(8, D))
        P -= (P.sum(axis=1, keepdims=True) - 1) / D
        data = comps(P)
        da = aitchison_distance_matrix(data).entries
        di = distance_matrix(compositional_residuals(data), "identity").entries
        off = ~np.eye(8, dtype=bool)
        assert np.max(np.abs(da[off] - di[off]) / di[off]) < 1e-2


@pytest.mark.parametrize("D", [3, 4, 5, 6])
def test_structure_residual_zero_on_exact_family(rng, D):
    phi = rng.uniform(0.5, 3, size=D)
    C = centering_matrix(D)
    diag = null_correlation_diagnostic(CenteredDispersion(C @ np.diag(phi) @ C))
    assert diag.structure_residual < 1e-10
    np.testing.assert_allclose(diag.fitted_variances, phi, atol=1e-8)


def test_structure_two_parts_min_norm():
    C = centering_matrix(2)
    diag = null_correlation_diagnostic(C @ np.diag([1.0, 3.0]) @ C)
    assert diag.structure_residual < 1e-12
    # only the sum phi_1 + phi_2 = 4 is identified; min-norm splits it evenly
    np.testing.assert_allclose(diag.fitted_variances, [2.0, 2.0], atol=1e-12)


def test_structure_three_parts_saturated(rng):
    A = rng.normal(size=(3, 3))
    C = centering_matrix(3)
    assert null_correlation_diagnostic(C @ A @ A.T @ C).structure_residual < 1e-10


def test_structure_detects_correlation(rng):
    C = centering_matrix(4)
    Phi = np.diag([1.0, 1.0, 1.0, 1.0])
    Phi[0, 1] = Phi[1, 0] = 0.8
    assert null_correlation_diagnostic(C @ Phi @ C).structure_residual > 0.1


def test_bootstrap_p_in_range_and_reproducible(rng):
    R = compositional_residuals(comps(rng.dirichlet(5 * np.ones(4), size=200)))
    a = null_correlation_test(R, 49, seed=3)
    b = null_correlation_test(R, 49, seed=3)
    assert 0 < a.bootstrap_p <= 1 and a.bootstrap_p == b.bootstrap_p and a.bootstrap_reps == 49
    with pytest.raises(ConfigError):
        null_correlation_diagnostic(np.zeros((4, 4)), -1)
