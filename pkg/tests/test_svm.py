import numpy as np
import pytest

from octune.descriptors import svm_fit, svm_score
from octune.svm import SVMConvergenceError, gaussian_kernel, kkt_violation, solve_dual

import oracles


def test_single_point():
    m = svm_fit(np.array([[1.0, 2.0]]), 0.5, 0.5)
    np.testing.assert_array_equal(m.alpha, [1.0])
    assert svm_score(m, [1.0, 2.0]) == 0.0
    y = np.array([0.0, 0.0])
    expected = gaussian_kernel([1.0, 2.0], y, m.c)[0, 0] - 1.0
    assert svm_score(m, y) == pytest.approx(expected, abs=1e-15)


def test_nu_one_forces_uniform_alpha():
    X = np.random.default_rng(0).normal(size=(7, 2))
    m = svm_fit(X, 1.0, 0.5)
    np.testing.assert_allclose(m.alpha_full, np.full(7, 1 / 7), rtol=0, atol=1e-15)


def test_small_instance_matches_projected_gradient():
    X = np.random.default_rng(3).normal(size=(6, 2))
    m = svm_fit(X, 0.3, 0.6)
    K = oracles.gaussian_gram(X, m.c)
    assert abs(m.dual_objective - oracles.svm_dual_oracle(K, 0.3)) <= 1e-4


def test_free_support_vector_scores_near_zero():
    X = np.random.default_rng(5).normal(size=(30, 2))
    m = svm_fit(X, 0.2, 0.5)
    free = (m.alpha > 1e-9) & (m.alpha < m.C - 1e-9)
    assert free.any()
    scores = m.score_samples(m.support_vectors[free])
    assert np.max(np.abs(scores)) <= 1e-3


def test_far_point_scores_minus_rho():
    X = np.random.default_rng(6).normal(size=(10, 2))
    m = svm_fit(X, 0.3, 0.5)
    assert svm_score(m, [1e3, 1e3]) == pytest.approx(-m.rho, abs=1e-15)


def test_scores_match_explicit_sum():
    rng = np.random.default_rng(7)
    X, Y = rng.normal(size=(12, 3)), rng.normal(size=(5, 3))
    m = svm_fit(X, 0.25, 0.3)
    direct = [sum(a * np.exp(-np.sum((x - y) ** 2) / m.c) for a, x in zip(m.alpha_full, X)) - m.rho
              for y in Y]
    np.testing.assert_allclose(m.score_samples(Y), direct, rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_nu_property(seed):
    rng = np.random.default_rng(seed)
    n = 40
    X = rng.normal(size=(n, 2))
    nu = rng.uniform(0.05, 0.9)
    m = svm_fit(X, nu, rng.uniform(0.1, 0.9))
    scores = m.score_samples(X)
    assert np.mean(scores < -1e-3) <= nu + 1 / n
    assert len(m.alpha) / n >= nu - 1 / n


def test_kkt_violation_small():
    X = np.random.default_rng(8).normal(size=(25, 2))
    K = gaussian_kernel(X, X, 1.0)
    alpha, rho, _ = solve_dual(K, 0.2)
    assert kkt_violation(K @ alpha, alpha, 1 / (0.2 * 25)) <= 1e-3
    assert abs(alpha.sum() - 1) <= 1e-12


def test_iteration_cap_raises_with_violation():
    X = np.random.default_rng(9).normal(size=(40, 2))
    K = gaussian_kernel(X, X, 0.5)
    with pytest.raises(SVMConvergenceError) as err:
        solve_dual(K, 0.1, max_iter=1)
    assert err.value.violation > 0
