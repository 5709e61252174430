import math
import warnings

import numpy as np
import pytest

import supportlab as sl
from supportlab.decoders import (
    EnumerationBudgetError,
    _cd_sweeps,
    decode_exhaustive,
    decode_lasso,
    decode_omp,
    default_lambda_grid,
    delta_statistic,
)
from supportlab.ensemble import gram_precompute, observe, sample_design, sample_signal

from conftest import brute_force_decode, lstsq_residual


def test_orthogonal_single_spike():
    X = np.eye(4)
    y = np.array([0.0, 0.0, 3.0, 0.0])
    r = decode_exhaustive(gram_precompute(X, y), 1)
    assert tuple(r.estimate) == (2,)
    assert r.min_residual == pytest.approx(0.0, abs=1e-12)
    assert r.subsets_evaluated == 4


def test_zero_observation_tie_break():
    X = sample_design(5, 4, seed=0)
    r = decode_exhaustive(gram_precompute(X, np.zeros(5)), 2)
    assert tuple(r.estimate) == (0, 1)
    assert r.tie_count == 6
    assert r.subsets_evaluated == 6


def test_matches_brute_force_small():
    rng = np.random.default_rng(42)
    X = rng.standard_normal((8, 6))
    y = rng.standard_normal(8)
    r = decode_exhaustive(gram_precompute(X, y), 2)
    support, f_min, _ = brute_force_decode(X, y, 2)
    assert tuple(r.estimate) == support
    assert r.min_residual == pytest.approx(f_min, rel=1e-8)
    assert r.subsets_evaluated == 15


@pytest.mark.parametrize("seed", range(12))
def test_oracle_equivalence_random_instances(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    p = int(rng.integers(4, 11))
    s = int(rng.integers(1, 4))
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    r = decode_exhaustive(gram_precompute(X, y), s)
    support, f_min, _ = brute_force_decode(X, y, s)
    assert tuple(r.estimate) == support
    assert abs(r.min_residual - f_min) <= 1e-8 * max(1.0, f_min)
    assert r.subsets_evaluated == math.comb(p, s)


def test_enumeration_count_exact():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((6, 9))
    y = rng.standard_normal(6)
    for s in (1, 2, 3, 4):
        r = decode_exhaustive(gram_precompute(X, y), s)
        assert r.subsets_evaluated == math.comb(9, s)


def test_scale_invariance():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((9, 7))
    y = rng.standard_normal(9)
    r1 = decode_exhaustive(gram_precompute(X, y), 3)
    r2 = decode_exhaustive(gram_precompute(X, 11.0 * y), 3)
    assert np.array_equal(r1.estimate, r2.estimate)


def test_noiseless_exactness_sample():
    for trial in range(50):
        X = sample_design(8, 16, seed=77, trial=trial)
        beta = sample_signal(16, 3, 1.0, "random-sign", seed=77, trial=trial)
        y = observe(X, beta, sigma=0.0, seed=77, trial=trial)
        r = decode_exhaustive(gram_precompute(X, y), 3)
        assert np.array_equal(r.estimate, beta.support)


def test_budget_refusal():
    X = sample_design(4, 40, seed=3)
    y = np.zeros(4)
    with pytest.raises(EnumerationBudgetError) as err:
        decode_exhaustive(gram_precompute(X, y), 12)
    assert err.value.count == math.comb(40, 12)


def test_warns_when_s_exceeds_n():
    X = sample_design(2, 5, seed=4)
    y = sample_design(2, 1, seed=5)[:, 0]
    cache = gram_precompute(X, y)
    with pytest.warns(UserWarning):
        r = decode_exhaustive(cache, 3)
    # every subset interpolates; lexicographic winner expected
    assert tuple(r.estimate) == (0, 1, 2)


def test_delta_zero_for_true_support():
    X = sample_design(8, 5, seed=6)
    beta = sample_signal(5, 2, 1.0, "all-positive", seed=6)
    y = observe(X, beta, 1.0, seed=6)
    st = delta_statistic(X, y, beta, beta.support)
    assert st.delta == 0.0
    assert st.overlap_complement == 0


def test_delta_positive_noiseless():
    rng = np.random.default_rng(7)
    for trial in range(100):
        X = sample_design(6, 8, seed=100, trial=trial)
        beta = sample_signal(8, 2, 1.0, "random-sign", seed=100, trial=trial)
        y = observe(X, beta, sigma=0.0, seed=100, trial=trial)
        while True:
            U = np.sort(rng.choice(8, size=2, replace=False))
            if not np.array_equal(U, beta.support):
                break
        st = delta_statistic(X, y, beta, U)
        assert st.delta > 0.0
        assert st.overlap_complement >= 1


def test_delta_equals_residual_difference():
    rng = np.random.default_rng(8)
    import itertools

    for trial in range(30):
        n = int(rng.integers(5, 12))
        p = int(rng.integers(4, 8))
        s = int(rng.integers(1, 4))
        X = sample_design(n, p, seed=200, trial=trial)
        beta = sample_signal(p, s, 0.8, "random-sign", seed=200, trial=trial)
        y = observe(X, beta, 1.0, seed=200, trial=trial)
        f_s = lstsq_residual(X[:, beta.support], y)
        for U in itertools.combinations(range(p), s):
            st = delta_statistic(X, y, beta, np.array(U))
            gap = lstsq_residual(X[:, list(U)], y) - f_s
            assert abs(st.delta - gap) <= 1e-8 * max(1.0, f_s)


def test_delta_rejects_wrong_size():
    X = sample_design(6, 5, seed=9)
    beta = sample_signal(5, 2, 1.0, "all-positive", seed=9)
    y = observe(X, beta, 1.0, seed=9)
    with pytest.raises(ValueError):
        delta_statistic(X, y, beta, np.array([0, 1, 2]))


def test_omp_orthogonal_spike():
    X = np.eye(5)
    y = np.array([0.0, -2.0, 0.0, 0.0, 0.0])
    r = decode_omp(gram_precompute(X, y), 1)
    assert tuple(r.estimate) == (1,)


def test_omp_full_support():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((9, 4))
    y = rng.standard_normal(9)
    cache = gram_precompute(X, y)
    r = decode_omp(cache, 4)
    assert tuple(r.estimate) == (0, 1, 2, 3)
    assert r.min_residual == pytest.approx(lstsq_residual(X, y), abs=1e-8)


def test_omp_matches_exhaustive_noiseless_overdetermined():
    agree = 0
    for trial in range(40):
        X = sample_design(16, 8, seed=300, trial=trial)
        beta = sample_signal(8, 2, 1.0, "random-sign", seed=300, trial=trial)
        y = observe(X, beta, sigma=0.0, seed=300, trial=trial)
        cache = gram_precompute(X, y)
        if np.array_equal(decode_omp(cache, 2).estimate, decode_exhaustive(cache, 2).estimate):
            agree += 1
    assert agree >= 38  # expected agreement near 1 at this scale


def test_lasso_kkt_zero_above_lambda_max():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((10, 5))
    y = rng.standard_normal(10)
    lam_max = float(np.max(np.abs(X.T @ y)))
    gram = X.T @ X
    beta = np.zeros(5)
    rho = X.T @ y
    converged = _cd_sweeps(gram, np.diag(gram).copy(), beta, rho, lam_max * 1.0001, 10_000, 1e-12)
    assert converged
    assert np.all(beta == 0.0)


def test_lasso_orthogonal_soft_threshold():
    rng = np.random.default_rng(12)
    Q, _ = np.linalg.qr(rng.standard_normal((12, 6)))
    y = rng.standard_normal(12)
    c = Q.T @ y
    lam = 0.3 * float(np.max(np.abs(c)))
    gram = Q.T @ Q
    beta = np.zeros(6)
    rho = c.copy()
    _cd_sweeps(gram, np.diag(gram).copy(), beta, rho, lam, 10_000, 1e-14)
    expected = np.sign(c) * np.maximum(np.abs(c) - lam, 0.0)
    assert np.allclose(beta, expected, atol=1e-10)


def test_lasso_zero_observation_fallback():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((8, 6))
    r = decode_lasso(X, np.zeros(8), 3)
    assert tuple(r.estimate) == (0, 1, 2)


def test_lasso_recovers_strong_signal():
    X = sample_design(48, 12, seed=14)
    beta = sample_signal(12, 2, 2.0, "random-sign", seed=14)
    y = observe(X, beta, 1.0, seed=14)
    r = decode_lasso(X, y, 2)
    assert np.array_equal(r.estimate, beta.support)
    assert r.converged


def test_lasso_grid_validation():
    X = sample_design(6, 4, seed=15)
    y = observe(X, sample_signal(4, 1, 1.0, "all-positive", seed=15), 1.0, seed=15)
    with pytest.raises(ValueError):
        decode_lasso(X, y, 1, lambda_grid=np.array([]))
    with pytest.raises(ValueError):
        decode_lasso(X, y, 1, lambda_grid=np.array([0.1, 0.5]))  # increasing
    grid = default_lambda_grid(X, y)
    assert len(grid) == 50 and grid[0] > grid[-1] > 0
