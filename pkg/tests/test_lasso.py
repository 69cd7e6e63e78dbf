import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aclasso.core import standardize
from aclasso.diagnostics import lambda0_empirical, lasso_oracle_bound, lasso_oracle_lhs
from aclasso.exceptions import DimensionMismatch, EmptyPath
from aclasso.lasso import (
    Lasso,
    adaptive_weights,
    fit_adaptive_lasso,
    fit_lasso,
    lambda_max,
    lambda_path,
    lasso_kkt_residual,
    lasso_objective,
    lasso_path,
    soft_threshold,
    threshold_fit,
)

from conftest import random_design
from oracles import lasso_brute_force


def _instance(seed, n, p, rho=0.3):
    rng = np.random.default_rng(seed)
    X = standardize(random_design(rng, n, p, rho))[0].values
    beta = np.zeros(p)
    beta[: max(1, p // 3)] = rng.choice([-2, -1, 1, 2], max(1, p // 3))
    y = X @ beta + rng.standard_normal(n)
    return X, y - y.mean()


def _orthonormal(n, p, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, p)))
    return Q * np.sqrt(n)


@pytest.mark.parametrize("z, g, out", [(3, 1, 2), (-0.5, 1, 0), (-3, 1, -2)])
def test_soft_threshold(z, g, out):
    assert soft_threshold(z, g) == out


def test_soft_threshold_negative_gamma():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -1.0)


def test_zero_above_lambda_max():
    X, y = _instance(1, 30, 10)
    lmax = lambda_max(X, y)
    assert not np.any(fit_lasso(X, y, lmax).beta)
    assert not np.any(fit_lasso(X, y, 2 * lmax).beta)
    assert np.any(fit_lasso(X, y, 0.9 * lmax).beta)


def test_orthonormal_closed_form():
    n, p = 40, 6
    X = _orthonormal(n, p)
    rng = np.random.default_rng(3)
    y = X @ rng.normal(0, 1, p) + rng.standard_normal(n)
    for lam in (0.01, 0.3, 1.0):
        expected = soft_threshold(X.T @ y / n, lam / 2)
        np.testing.assert_allclose(fit_lasso(X, y, lam).beta, expected, atol=1e-7)


@pytest.mark.parametrize("seed", range(50))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(1000 + seed)
    p = int(rng.integers(2, 9))
    X, y = _instance(seed, 20, p)
    lam = float(rng.uniform(0.05, 0.8)) * lambda_max(X, y)
    best, _ = lasso_brute_force(X, y, lam)
    fit = fit_lasso(X, y, lam)
    assert fit.objective <= best + 1e-6
    assert fit.objective == pytest.approx(lasso_objective(X, y, fit.beta, lam), abs=1e-12)


@pytest.mark.parametrize("p", [10, 50, 200, 500])
def test_kkt_up_to_p500(p):
    X, y = _instance(p, 60, p, rho=0.5)
    t0 = time.perf_counter()
    for fit in lasso_path(X, y, lambda_path(X, y, 20, 1e-2)):
        assert fit.kkt_residual <= 1e-6
        assert lasso_kkt_residual(X, y, fit.beta, fit.lam) <= 1e-6
    assert time.perf_counter() - t0 < 60


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.99))
def test_objective_nonincreasing_per_sweep(seed, frac):
    X, y = _instance(seed, 25, 12, rho=0.6)
    fit = fit_lasso(X, y, frac * lambda_max(X, y), trace=True)
    tr = np.asarray(fit.objective_trace)
    assert tr.size >= 1
    assert np.all(np.diff(tr) <= 1e-12 * max(1.0, tr[0]))
    assert fit.kkt_residual <= 1e-6


def test_nested_supports_on_orthonormal_design():
    X = _orthonormal(50, 15, seed=4)
    rng = np.random.default_rng(5)
    y = X @ rng.normal(0, 1, 15) + 0.5 * rng.standard_normal(50)
    fits = lasso_path(X, y, lambda_path(X, y, 30, 1e-3))
    assert fits[0].support.size == 0
    for a, b in zip(fits, fits[1:]):
        assert set(a.support) <= set(b.support)


def test_lambda_path_basics():
    X, y = _instance(2, 30, 5)
    path = lambda_path(X, y, 2, 0.1)
    np.testing.assert_allclose(path.values, [lambda_max(X, y), 0.1 * lambda_max(X, y)])
    assert np.all(np.diff(lambda_path(X, y).values) < 0)
    with pytest.raises(EmptyPath):
        lambda_path(X, np.zeros(30))
    with pytest.raises(ValueError):
        lambda_path(X, y, 1)


def test_lambda_max_hand_computed():
    X = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])
    y = np.array([2.0, 0.0, 1.0, -3.0])
    # (2/n) X^T y = (2/4) * (6, 4) = (3, 2)
    assert lambda_max(X, y) == pytest.approx(3.0)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        fit_lasso(np.ones((5, 2)), np.ones(4), 0.1)


def test_adaptive_weight_formula():
    np.testing.assert_allclose(adaptive_weights([0.0, 1.0]), [1000.0, 1 / 1.001])


def test_adaptive_equals_rescaled_plain_lasso():
    X, y = _instance(7, 30, 8)
    init = fit_lasso(X, y, 0.1 * lambda_max(X, y))
    w = adaptive_weights(init.beta)
    lam = 0.05
    ada = fit_adaptive_lasso(X, y, lam, init, tol=1e-10)
    plain = fit_lasso(X / w, y, lam, tol=1e-10)
    np.testing.assert_allclose(ada.beta, plain.beta / w, atol=1e-6)
    assert lasso_kkt_residual(X, y, ada.beta, lam, weights=w) <= 1e-6


def test_uniform_weights_same_support():
    X, y = _instance(8, 30, 8)
    ada = fit_adaptive_lasso(X, y, 0.1, np.full(8, 0.5))
    plain = fit_lasso(X, y, 0.1 / 0.501)
    np.testing.assert_array_equal(ada.support, plain.support)


def test_threshold_fit():
    b = np.array([0.5, -0.1, 2.0, 0.0])
    np.testing.assert_array_equal(threshold_fit(b, 0.0), b)
    assert not np.any(threshold_fit(b, 2.0))
    np.testing.assert_array_equal(np.flatnonzero(threshold_fit(b, 0.3)), [0, 2])


@pytest.mark.parametrize("seed", range(5))
def test_oracle_inequality(seed):
    rng = np.random.default_rng(seed)
    n, p, s = 200, 10, 3
    X = standardize(random_design(rng, n, p, 0.3))[0].values
    beta0 = np.zeros(p)
    beta0[:s] = 1.5
    noise = rng.standard_normal(n)
    y = X @ beta0 + noise
    lam = 2 * lambda0_empirical(X, noise)
    phi2 = np.linalg.eigvalsh(X.T @ X / n)[0]
    fit = fit_lasso(X, y, lam)
    assert lasso_oracle_lhs(X, fit.beta, beta0, lam) <= lasso_oracle_bound(lam, s, phi2)


def test_estimator_roundtrip():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((40, 5)) * 3 + 1
    y = X[:, 0] * 2 + rng.standard_normal(40)
    est = Lasso(alpha=0.05).fit(X, y)
    assert est.predict(X).shape == (40,)
    assert est.coef_[0] > 1
    assert est.kkt_residual_ <= 1e-6
