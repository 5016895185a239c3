import math

import numpy as np
import pytest

from jnnts.exceptions import ConfigurationError, InputError
from jnnts.kernel import (KernelSpec, PriorStructure, build_kernel, check_pd_constraint,
                          default_delta, eigendecompose, joint_covariance)


def test_squared_exponential_values():
    O = build_kernel(np.array([[0.0, 0, 0], [0, 0, 0], [2, 0, 0]]))
    assert O[0, 1] == 1.0
    assert O[0, 2] == pytest.approx(math.exp(-2.0))
    assert np.all(np.diag(O) == 1.0)


def test_kernel_bitwise_symmetric(rng):
    O = build_kernel(rng.standard_normal((15, 3)) * 1.7)
    assert np.array_equal(O, O.T)


def test_marginal_identity():
    np.testing.assert_array_equal(build_kernel(None, KernelSpec("marginal-identity"),
                                               n_nodes=3), np.eye(3))


def test_hemisphere_symmetric():
    O = build_kernel(None, KernelSpec("hemisphere-symmetric", pairs=((0, 2),)), n_nodes=4)
    expected = np.eye(4)
    expected[0, 2] = expected[2, 0] = 0.2
    np.testing.assert_array_equal(O, expected)


def test_kernel_errors():
    with pytest.raises(InputError):
        build_kernel(np.array([[0.0, np.nan, 0]]))
    with pytest.raises(ConfigurationError):
        build_kernel(None, KernelSpec(), n_nodes=3)
    with pytest.raises(ConfigurationError):
        KernelSpec("hemisphere-symmetric")
    with pytest.raises(ConfigurationError):
        KernelSpec("hemisphere-symmetric", pairs=((0, 1), (1, 2)))
    with pytest.raises(ConfigurationError):
        KernelSpec("nope")


def test_eigendecompose_examples(rng):
    U, d = eigendecompose(np.eye(4))
    np.testing.assert_allclose(d, 1.0)
    np.testing.assert_allclose(U.T @ np.diag(d) @ U, np.eye(4), atol=1e-14)
    U, d = eigendecompose(np.array([[1.0, 0.5], [0.5, 1.0]]))
    np.testing.assert_allclose(d, [1.5, 0.5])
    B = rng.standard_normal((10, 10))
    O = B @ B.T + 0.1 * np.eye(10)
    U, d = eigendecompose(O)
    assert np.all(np.diff(d) <= 0)
    assert np.max(np.abs(U.T @ np.diag(d) @ U - O)) < 1e-8 * np.max(np.abs(O))


def test_eigenvalue_floor_warns():
    coords = np.zeros((3, 3))  # coincident nodes, rank-one kernel
    with pytest.warns(UserWarning, match="clamped"):
        prior = PriorStructure.build(coords)
    assert prior.d_min > 0


def test_pd_constraint_examples():
    assert check_pd_constraint(0.0, 3.0, 0.01)
    assert not check_pd_constraint(0.9, 10.0, 0.05)
    assert all(check_pd_constraint(r, 10.0, 1.0) for r in np.linspace(-0.999, 0.999, 11))


def test_default_delta_covers_rho_support():
    for d_min in (1.0, 0.3, 0.05, 1e-3):
        delta = default_delta(d_min)
        assert delta >= 10
        assert check_pd_constraint(1.0, delta, d_min)


def test_joint_covariance_pd_when_feasible(rng):
    for _ in range(50):
        O = build_kernel(rng.uniform(0, 3, (6, 3)))
        U, d = eigendecompose(O)
        delta = rng.uniform(0.5, 20)
        rho = rng.uniform(-1, 1)
        if check_pd_constraint(rho, delta, d[-1]):
            np.linalg.cholesky(joint_covariance(O, rho, delta, sigma=rng.uniform(0.1, 3)))


def test_quadratic_form_both_ways(rng):
    for p in range(2, 9):
        O = build_kernel(rng.uniform(0, 2, (p, 3)))
        U, d = eigendecompose(O)
        prior = PriorStructure(O=O, U=U, d=d, delta=default_delta(d[-1]))
        g, t = rng.standard_normal(p), rng.standard_normal(p)
        rho = rng.uniform(-0.9, 0.9)
        cov = joint_covariance(O, rho, prior.delta)
        v = np.concatenate([g, t])
        direct = v @ np.linalg.solve(cov, v)
        assert prior.quadratic_form(g, t, rho) == pytest.approx(direct, rel=1e-6)
        # rho = 0 reduces to gamma' O^-1 gamma + theta' O^-1 theta
        direct0 = g @ np.linalg.solve(O, g) + t @ np.linalg.solve(O, t)
        assert prior.quadratic_form(g, t, 0.0) == pytest.approx(direct0, rel=1e-6)
        _, logdet = np.linalg.slogdet(cov)
        assert prior.log_det_factor(rho) == pytest.approx(logdet, rel=1e-6, abs=1e-8)


def test_precision_blocks_invert_covariance(rng):
    O = build_kernel(rng.uniform(0, 2, (5, 3)))
    U, d = eigendecompose(O)
    prior = PriorStructure(O=O, U=U, d=d, delta=default_delta(d[-1]))
    rho = 0.6
    K1, K2 = prior.precision_blocks(rho)
    c = rho / prior.delta
    prec = np.block([[K1, -c * K2], [-c * K2, K1]])
    np.testing.assert_allclose(prec @ joint_covariance(O, rho, prior.delta), np.eye(10),
                               atol=1e-8)
