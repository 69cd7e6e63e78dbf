import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aclasso.exceptions import IncompatibleConfig, NotPSD, TooFewColumns
from aclasso.simulation import (
    COEF_GRID,
    SCENARIOS,
    ScenarioConfig,
    e3_small_coefficient,
    generate,
    make_beta,
    make_sigma1,
    make_sigma2,
    make_sigma3,
    pseudo_real,
    sample_gaussian,
    true_blocks,
    write_dataset,
)

# frozen value of ((1/3) * sqrt(ln 1000 / 100) * 3) / 1.9
E3_SMALL = 0.13832952025676135


def test_sigma1_entries_and_eigenvalues():
    S = make_sigma1()
    assert S.shape == (1000, 1000)
    assert S[0, 1] == 0.9 and S[0, 10] == 0 and np.all(np.diag(S) == 1)
    block = S[:10, :10]
    ev = np.linalg.eigvalsh(block)
    assert ev[0] == pytest.approx(0.1, abs=1e-12)
    assert ev[-1] == pytest.approx(1 + 9 * 0.9, abs=1e-12)


def test_sigma2_entries():
    S = make_sigma2()
    assert S[0, 1] == 0.9 and S[29, 28] == 0.9
    assert S[0, 30] == 0 and S[30, 31] == 0 and S[500, 501] == 0
    assert np.all(np.diag(S) == 1)


def test_sigma3_entries_and_eigenvalues():
    S = make_sigma3()
    assert S[0, 1] == 0.9 and S[1, 2] == 0
    np.testing.assert_allclose(np.linalg.eigvalsh(S[:2, :2]), [0.1, 1.9], atol=1e-12)


@pytest.mark.parametrize("S", [make_sigma1(5, 4, 0.5), make_sigma2(50, 10, 0.7), make_sigma3(6, 0.3)])
def test_covariances_symmetric_psd_block_zero(S):
    np.testing.assert_array_equal(S, S.T)
    assert np.linalg.eigvalsh(S)[0] > 0


def test_block_cross_terms_exactly_zero():
    S = make_sigma1(4, 5, 0.9)
    blocks = true_blocks("sigma1", 20, 5)
    lab = blocks.labels()
    assert np.all(S[lab[:, None] != lab[None, :]] == 0)


def test_e1_active_sets():
    beta, s0 = make_beta("e1.1", 1000, seed=1)
    assert s0.tolist() == list(range(20))
    np.testing.assert_allclose(np.sort(beta[s0]), COEF_GRID)
    _, s0 = make_beta("e1.2", 1000, seed=1)
    assert (s0 + 1).tolist() == [b * 10 + k for b in range(10) for k in (1, 2)]


@pytest.mark.parametrize("cid", [k for k in SCENARIOS if k.startswith("e")])
def test_support_equals_s0(cid):
    cfg = ScenarioConfig(cid)
    beta, s0 = make_beta(cid, 1000, 3.0, 100, seed=5, block_size=cfg.resolved_block_size)
    np.testing.assert_array_equal(np.flatnonzero(beta), s0)


@pytest.mark.parametrize("cid", ["e1.3", "e1.4", "e2.3", "e2.4"])
def test_sign_flips_half(cid):
    bs = ScenarioConfig(cid).resolved_block_size
    beta, s0 = make_beta(cid, 1000, seed=3, block_size=bs)
    unflipped, _ = make_beta(cid.replace(".3", ".1").replace(".4", ".2"), 1000, seed=3, block_size=bs)
    assert (beta[s0] < 0).sum() == len(s0) // 2 == 10
    np.testing.assert_array_equal(np.abs(beta), np.abs(unflipped))


def test_e2_active_sets():
    _, s0 = make_beta("e2.1", 1000, seed=0, block_size=30)
    assert s0.tolist() == list(range(15)) + list(range(30, 35))
    _, s0 = make_beta("e2.2", 1000, seed=0, block_size=30)
    assert s0.tolist() == list(range(5)) + list(range(30, 45))


def test_e3_coefficients_frozen():
    assert e3_small_coefficient(1000, 100, 3.0) == pytest.approx(E3_SMALL, abs=1e-15)
    beta, s0 = make_beta("e3", 1000, 3.0, 100)
    assert s0.tolist() == list(range(20))
    assert np.all(beta[0:20:2] == 2.0)
    np.testing.assert_allclose(beta[1:20:2], E3_SMALL, atol=1e-15)
    again, _ = make_beta("e3", 1000, 3.0, 100, seed=99)
    np.testing.assert_array_equal(beta, again)


def test_incompatible_config():
    with pytest.raises(IncompatibleConfig, match="valid ids"):
        ScenarioConfig("e9")
    with pytest.raises(IncompatibleConfig):
        ScenarioConfig("e1.1", p=10)
    with pytest.raises(IncompatibleConfig):
        ScenarioConfig("e1.1", rho=1.0)
    with pytest.raises(IncompatibleConfig):
        make_beta("bogus", 100)


def test_sample_gaussian_identity_covariance():
    n = 20000
    X = sample_gaussian(np.eye(4), n, 0)
    assert np.abs(np.cov(X, rowvar=False, bias=True) - np.eye(4)).max() < 5 / np.sqrt(n)
    np.testing.assert_array_equal(X, sample_gaussian(np.eye(4), n, 0))


def test_sample_gaussian_block_correlation():
    X = sample_gaussian(make_sigma1(2, 10, 0.9), 10_000, 1)
    C = np.corrcoef(X, rowvar=False)
    within = C[:10, :10][~np.eye(10, dtype=bool)]
    assert np.all(np.abs(within - 0.9) < 0.02)


def test_sample_gaussian_not_psd():
    with pytest.raises(NotPSD):
        sample_gaussian(np.array([[1.0, 2.0], [2.0, 1.0]]), 5, 0)


def test_generate_noiseless_and_deterministic():
    cfg = ScenarioConfig("e1.1", p=100, sigma=0.0, replicates=2, seed=3)
    ds = generate(cfg, 0)
    np.testing.assert_array_equal(ds.y_train, ds.X_train @ ds.beta)
    again = generate(cfg, 0)
    for a in ("X_train", "y_train", "X_val", "y_val", "beta"):
        np.testing.assert_array_equal(getattr(ds, a), getattr(again, a))
    other = generate(cfg, 1)
    assert not np.array_equal(ds.X_train, other.X_train)


def test_sigma_change_keeps_design_and_beta():
    a = generate(ScenarioConfig("e1.1", p=100, sigma=0.0, seed=4), 0)
    b = generate(ScenarioConfig("e1.1", p=100, sigma=3.0, seed=4), 0)
    np.testing.assert_array_equal(a.X_train, b.X_train)
    np.testing.assert_array_equal(a.beta, b.beta)


@pytest.mark.parametrize("rep", range(5))
def test_noise_concentration(rep):
    cfg = ScenarioConfig("e1.1", sigma=3.0, seed=0)
    ds = generate(cfg, rep)
    r = ds.y_train - ds.X_train @ ds.beta
    n = r.size
    assert abs(r @ r / n - 9.0) <= 3 * 9.0 * np.sqrt(2 / n)


def _planted(n=200, p=40, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    X = rng.standard_normal((n, p))
    # columns 1..12 carry decreasing shares of z; the top nine partners are 1..9
    for i, w in enumerate(np.linspace(0.95, 0.4, 12)):
        X[:, i + 1] = w * z + np.sqrt(1 - w**2) * rng.standard_normal(n)
    X[:, 0] = z
    return X


def test_pseudo_real_planted_ranking():
    X = _planted()
    ds = None
    for rep in range(200):
        cand = pseudo_real(X, top_k=40, s0_size=10, sigma=1.0, seed=0, replicate=rep)
        if cand.meta["seed_column"] == 0:
            ds = cand
            break
    assert ds is not None
    assert ds.s0.tolist() == list(range(10))
    assert np.all(ds.beta[ds.s0] == 1.0)


def test_pseudo_real_duplicate_column_included():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 30))
    X[:, 7] = X[:, 3]
    for rep in range(300):
        ds = pseudo_real(X, top_k=30, s0_size=5, seed=2, replicate=rep)
        if ds.meta["seed_column"] == 3:
            assert 7 in ds.s0
            break
    else:
        pytest.fail("column 3 was never drawn")


def test_pseudo_real_filters():
    X = np.random.default_rng(2).standard_normal((30, 20)) * 2.0 ** np.arange(20)
    ds = pseudo_real(X, top_k=20, s0_size=5)
    assert ds.meta["kept_columns"] == list(range(20))
    ds = pseudo_real(X, top_k=10, s0_size=5)
    assert ds.meta["kept_columns"] == list(range(10, 20))
    with pytest.raises(TooFewColumns):
        pseudo_real(X, top_k=21)


def test_write_dataset(tmp_path):
    ds = generate(ScenarioConfig("e3", p=40, n_train=10, n_val=8, seed=1), 0)
    write_dataset(ds, tmp_path)
    X = np.loadtxt(tmp_path / "X_train.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(X, ds.X_train)
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert truth["s0"] == ds.s0.tolist()


@given(st.integers(0, 2**16), st.integers(0, 5))
def test_replicate_determinism_property(seed, rep):
    cfg = ScenarioConfig("e3", p=20, n_train=5, n_val=5, seed=seed)
    a, b = generate(cfg, rep), generate(cfg, rep)
    np.testing.assert_array_equal(a.y_val, b.y_val)
