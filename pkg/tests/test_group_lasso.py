import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aclasso.core import standardize
from aclasso.diagnostics import group_oracle_bound, group_oracle_lhs, lambda0_empirical
from aclasso.exceptions import EmptyPath, RankDeficientGroup
from aclasso.group_lasso import (
    GroupLasso,
    GroupPartition,
    fit_group_lasso,
    group_lambda_max,
    group_lambda_path,
    group_lasso_path,
    group_soft_threshold,
    orthonormalize_groups,
)
from aclasso.lasso import fit_lasso, lambda_max, lambda_path

from conftest import random_design
from oracles import group_lasso_prox_grad


def _instance(seed, n=40, p=9, rho=0.4):
    rng = np.random.default_rng(seed)
    X = standardize(random_design(rng, n, p, rho))[0].values.copy()
    beta = np.zeros(p)
    beta[:3] = rng.choice([-1.5, 1.0, 2.0], 3)
    y = X @ beta + rng.standard_normal(n)
    return X, y - y.mean()


def _rotated(X, partition, seed):
    rng = np.random.default_rng(seed)
    Xr = X.copy()
    for g in partition.groups:
        if len(g) > 1:
            Q, _ = np.linalg.qr(rng.standard_normal((len(g), len(g))))
            Xr[:, list(g)] = X[:, list(g)] @ Q
    return Xr


P3 = GroupPartition(((0, 1, 2), (3, 4), (5,), (6, 7, 8)))


@pytest.mark.parametrize(
    "v, g, out", [((3, 4), 5, (0, 0)), ((3, 4), 0, (3, 4)), ((6, 8), 5, (3, 4))]
)
def test_group_soft_threshold(v, g, out):
    np.testing.assert_allclose(group_soft_threshold(np.array(v, float), g), out)


def test_partition_validation():
    with pytest.raises(ValueError):
        GroupPartition(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        GroupPartition(((0, 2),))
    assert GroupPartition(((2, 1), (0,))) == GroupPartition(((0,), (1, 2)))
    assert GroupPartition.singletons(3).is_refinement_of(GroupPartition(((0, 1, 2),)))
    assert not GroupPartition(((0, 1, 2),)).is_refinement_of(GroupPartition.singletons(3))
    assert P3.satisfies_a1(4) and not P3.satisfies_a1(3)


def test_orthonormalize_identity_for_singletons():
    X, _ = _instance(0)
    Z, basis = orthonormalize_groups(X, GroupPartition.singletons(9))
    np.testing.assert_allclose(Z, X, atol=1e-12)
    assert not basis.rank_deficient


def test_orthonormalize_three_column_group():
    X, _ = _instance(1, rho=0.8)
    Z, basis = orthonormalize_groups(X, P3)
    n = X.shape[0]
    for s, k in zip(basis.starts, basis.dims):
        blk = Z[:, s : s + k]
        np.testing.assert_allclose(blk.T @ blk / n, np.eye(k), atol=1e-10)


def test_rank_deficient_group_reduced():
    X, y = _instance(2)
    X[:, 1] = X[:, 0]
    with pytest.warns(RankDeficientGroup):
        Z, basis = orthonormalize_groups(X, P3)
    assert basis.dims[0] == 2 and basis.rank_deficient == (0,)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientGroup)
        fit = fit_group_lasso(X, y, P3, 0.1)
    assert fit.kkt_residual <= 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_singletons_reduce_to_lasso(seed):
    X, y = _instance(100 + seed)
    lam = 0.2 * lambda_max(X, y)
    g = fit_group_lasso(X, y, GroupPartition.singletons(9), lam, tol=1e-9)
    lf = fit_lasso(X, y, lam, tol=1e-10)
    np.testing.assert_allclose(g.beta, lf.beta, atol=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_rotation_invariance(seed):
    X, y = _instance(200 + seed)
    lam = 0.3 * group_lambda_max(X, y, P3)
    a = fit_group_lasso(X, y, P3, lam, tol=1e-9)
    b = fit_group_lasso(_rotated(X, P3, seed), y, P3, lam, tol=1e-9)
    np.testing.assert_array_equal(a.selected_groups, b.selected_groups)
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_matches_prox_grad_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 30
    X = standardize(random_design(rng, n, 6, 0.5))[0].values
    part = GroupPartition(((0, 1), (2, 3), (4, 5)))
    y = X[:, :2] @ [1.0, -1.0] + rng.standard_normal(n)
    y -= y.mean()
    lam = 0.3 * group_lambda_max(X, y, part)
    fit = fit_group_lasso(X, y, part, lam, tol=1e-9)
    best = group_lasso_prox_grad(X, y, part.groups, lam, starts=100, iters=300, seed=seed)
    assert fit.objective <= best + 1e-6


def test_zero_above_lambda_max_and_path():
    X, y = _instance(3)
    lmax = group_lambda_max(X, y, P3)
    assert fit_group_lasso(X, y, P3, lmax).selected_groups.size == 0
    assert fit_group_lasso(X, y, P3, 0.9 * lmax).selected_groups.size > 0
    fits = group_lasso_path(X, y, P3, group_lambda_path(X, y, P3, 10))
    assert fits[0].selected_groups.size == 0
    assert all(f.kkt_residual <= 1e-6 for f in fits)
    with pytest.raises(EmptyPath):
        group_lambda_path(X, np.zeros(X.shape[0]), P3)


def test_singleton_lambda_grid_equals_lasso_grid():
    X, y = _instance(4)
    np.testing.assert_allclose(
        group_lambda_path(X, y, GroupPartition.singletons(9)).values, lambda_path(X, y).values
    )


def test_group_lambda_max_hand_computed():
    n = 4
    X = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])
    # columns are orthonormal under (1/n) X^T X
    y = np.array([1.0, 2.0, 3.0, 4.0])
    part = GroupPartition(((0, 1), (2,)))
    grad = 2 / n * X.T @ y  # (-2, -1, 0)
    expected = max(np.linalg.norm(grad[:2]) / np.sqrt(2), abs(grad[2]))
    assert expected == pytest.approx(np.sqrt(2.5))
    assert group_lambda_max(X, y, part) == pytest.approx(expected)


@given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.95))
def test_block_properties(seed, frac):
    X, y = _instance(seed)
    lam = frac * group_lambda_max(X, y, P3)
    fit = fit_group_lasso(X, y, P3, lam, trace=True)
    tr = np.asarray(fit.objective_trace)
    assert np.all(np.diff(tr) <= 1e-12 * max(1.0, tr[0]))
    for r, g in enumerate(P3.groups):
        block = fit.beta[list(g)]
        if r in fit.selected_groups:
            assert np.linalg.norm(block) > 0
        else:
            assert np.all(block == 0)


@pytest.mark.parametrize("seed", range(3))
def test_group_oracle_inequality(seed):
    rng = np.random.default_rng(seed)
    n = 200
    X = standardize(random_design(rng, n, 9, 0.3))[0].values
    beta0 = np.zeros(9)
    beta0[:3] = [1.0, -1.0, 0.5]
    noise = rng.standard_normal(n)
    y = X @ beta0 + noise
    Z, basis = orthonormalize_groups(X, P3)
    lam = 2 * lambda0_empirical(Z, noise)
    phi2 = np.linalg.eigvalsh(X.T @ X / n)[0]
    fit = fit_group_lasso(X, y, P3, lam)
    assert group_oracle_lhs(X, fit.beta, beta0, P3, lam) <= group_oracle_bound(lam, [3], phi2)


def test_estimator():
    X, y = _instance(5)
    est = GroupLasso(groups=[0, 0, 0, 1, 1, 2, 3, 3, 3], alpha=0.1).fit(X, y)
    assert est.predict(X).shape == y.shape
