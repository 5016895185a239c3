import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jnnts.exceptions import ConfigurationError
from jnnts.model import (CoefficientSet, Dataset, LatentState, coefficient_matrix,
                         effective_coefficients, network_term, predict, predict_from_matrix,
                         supports_of, threshold_network, threshold_node,
                         verify_clique_uniqueness)

from conftest import random_connectivity


def test_threshold_node_examples():
    assert threshold_node([0.5, -2.0], 1.0).tolist() == [0, 1]
    assert threshold_node([1.0], 1.0).tolist() == [0]
    assert threshold_node([-0.3, 0.0, 2.5], 0.0).tolist() == [1, 0, 1]


def test_threshold_network_examples():
    assert threshold_network([2, 2], [0, 2], 1).tolist() == [0, 1]
    assert threshold_network([0, 0], [5, 5], 1).tolist() == [0, 0]
    assert threshold_network([1.5, -1.5], [-1.5, 1.5], 1).tolist() == [1, 1]


def _state(**kw):
    base = dict(beta_tilde=np.zeros(3), alpha_tilde=np.zeros((1, 3)), gamma=np.zeros(3),
                theta=np.zeros(3), theta_r=np.zeros((1, 3)), lam=1.0)
    base.update(kw)
    return LatentState(**base)


def test_effective_coefficients_masks():
    s = _state(beta_tilde=np.array([3.0, 4.0]), gamma=np.array([0.1, 9.0]),
               alpha_tilde=np.zeros((1, 2)), theta=np.zeros(2), theta_r=np.zeros((1, 2)))
    assert effective_coefficients(s).beta.tolist() == [0.0, 4.0]

    b = np.array([1.5, -2.0, 0.3])
    s = _state(beta_tilde=b, gamma=np.full(3, 5.0))
    np.testing.assert_array_equal(effective_coefficients(s).beta, b)

    s = _state(alpha_tilde=np.ones((1, 3)), theta=np.array([2.0, 2.0, 0.0]),
               theta_r=np.array([[2.0, 0.0, 2.0]]))
    assert effective_coefficients(s).alpha.tolist() == [[1.0, 0.0, 0.0]]


def test_masking_is_idempotent(rng):
    s = _state(beta_tilde=rng.standard_normal(3), alpha_tilde=rng.standard_normal((2, 3)),
               gamma=rng.standard_normal(3) * 2, theta=rng.standard_normal(3) * 2,
               theta_r=rng.standard_normal((2, 3)) * 2, lam=0.7)
    once = effective_coefficients(s)
    s2 = _state(beta_tilde=once.beta, alpha_tilde=once.alpha, gamma=s.gamma, theta=s.theta,
                theta_r=s.theta_r, lam=s.lam)
    twice = effective_coefficients(s2)
    np.testing.assert_array_equal(once.beta, twice.beta)
    np.testing.assert_array_equal(once.alpha, twice.alpha)


def _dataset(Z, X=None, y=None):
    n, p = Z.shape[:2]
    X = np.zeros((n, p)) if X is None else X
    y = np.zeros(n) if y is None else y
    return Dataset.from_arrays(y, X, Z)


def test_predict_single_edge():
    Z = np.zeros((1, 4, 4))
    Z[0, 0, 1] = Z[0, 1, 0] = 0.5
    coeffs = CoefficientSet(eta=np.zeros(1), beta=np.zeros(4),
                            alpha=np.array([[1.0, 1.0, 0.0, 0.0]]))
    assert predict(_dataset(Z), coeffs) == pytest.approx([1.0])


def test_predict_null_model(rng):
    ds = _dataset(random_connectivity(rng, 6, 4), X=rng.standard_normal((6, 4)))
    coeffs = CoefficientSet(eta=np.zeros(1), beta=np.zeros(4), alpha=np.zeros((2, 4)))
    assert np.all(predict(ds, coeffs) == 0.0)


def test_predict_paths_agree(rng):
    ds = _dataset(random_connectivity(rng, 30, 5), X=rng.standard_normal((30, 5)))
    coeffs = CoefficientSet(eta=rng.standard_normal(1), beta=rng.standard_normal(5),
                            alpha=rng.standard_normal((2, 5)))
    direct = predict(ds, coeffs)
    via_A = predict_from_matrix(ds, coeffs.eta, coeffs.beta, coeffs.A)
    np.testing.assert_allclose(direct, via_A, rtol=1e-10, atol=1e-12)


def test_predict_dimension_mismatch(rng):
    ds = _dataset(random_connectivity(rng, 3, 4))
    with pytest.raises(ConfigurationError):
        predict(ds, CoefficientSet(eta=np.zeros(1), beta=np.zeros(5), alpha=np.zeros((1, 4))))
    with pytest.raises(ConfigurationError):
        predict(ds, CoefficientSet(eta=np.zeros(1), beta=np.zeros(4), alpha=np.zeros((1, 3))))


def test_coefficient_matrix_exactly_symmetric(rng):
    A = coefficient_matrix(rng.standard_normal((3, 7)))
    assert np.array_equal(A, A.T)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 8), r=st.integers(1, 4))
def test_quadratic_form_matches_inner_product(seed, p, r):
    rng = np.random.default_rng(seed)
    Z = random_connectivity(rng, 3, p)
    alpha = rng.standard_normal((r, p))
    quad = network_term(Z, alpha)
    inner = np.einsum("kl,ikl->i", coefficient_matrix(alpha), Z)
    assert np.all(np.abs(quad - inner) <= 1e-10 * (1 + np.abs(quad)))


def test_uniqueness_examples():
    assert verify_clique_uniqueness([{1, 2, 3}, {3, 4, 5}]) == "unique"
    assert verify_clique_uniqueness([{1, 2}, {1, 2}]) == "not-verifiable"
    assert verify_clique_uniqueness([{1, 2}, set()]) == "degenerate"
    assert verify_clique_uniqueness([]) == "degenerate"


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_support_consistency(seed):
    rng = np.random.default_rng(seed)
    p, r = 8, 3
    alpha = rng.standard_normal((r, p)) * (rng.random((r, p)) < 0.4)
    A = coefficient_matrix(alpha)
    supports = supports_of(alpha)
    covered = np.zeros((p, p), dtype=bool)
    for s in supports:
        idx = sorted(s)
        covered[np.ix_(idx, idx)] = True
    # measure-zero cancellations between factors are excluded
    if np.any(covered & (np.abs(A) < 1e-12)):
        return
    assert np.array_equal(A != 0, covered)
