import math

import numpy as np
import pytest

from supportlab.ensemble import rng_stream
from supportlab.tails import (
    binom_bounds,
    chisq_central_lower,
    chisq_central_upper,
    chisq_noncentral_lower,
    chisq_noncentral_upper,
    log_binom,
    lower_tail_exponent,
    sample_noncentral_chisq,
    verify_binom_sandwich,
    verify_tail_bounds,
)


def test_central_upper_hand_value():
    threshold, prob = chisq_central_upper(10, 1.0)
    assert threshold == pytest.approx(10 + 2 * math.sqrt(10) + 2, rel=1e-12)
    assert prob == pytest.approx(math.exp(-1), rel=1e-12)


def test_central_upper_covers_twice_dof():
    # x = d/12 puts the threshold at or below 2d, giving the exp(-d/12) rate
    for d in (8, 30, 96, 500):
        threshold, prob = chisq_central_upper(d, d / 12.0)
        assert threshold <= 2 * d
        assert prob == pytest.approx(math.exp(-d / 12.0), rel=1e-12)


def test_central_lower_hand_values():
    threshold, _ = chisq_central_lower(4, 4.0)
    assert threshold == pytest.approx(-4.0)  # vacuous: probability zero region
    threshold, prob = chisq_central_lower(100, 1.0)
    assert threshold == pytest.approx(80.0)
    assert prob == pytest.approx(math.exp(-1))


def test_noncentral_reduces_to_central_at_zero():
    for d in (1, 7, 33):
        for x in (0.3, 2.0, 9.0):
            assert chisq_noncentral_upper(d, 0.0, x) == chisq_central_upper(d, x)
            lower_nc = chisq_noncentral_lower(d, 0.0, x)
            lower_c = chisq_central_lower(d, x)
            assert lower_nc[0] == pytest.approx(lower_c[0], abs=1e-12)
            assert lower_nc[1] == lower_c[1]


def test_noncentral_upper_hand_value():
    threshold, _ = chisq_noncentral_upper(10, 5.0, 1.0)
    assert threshold == pytest.approx(15 + 2 * math.sqrt(20) + 2, rel=1e-12)


def test_noncentral_lower_inversion():
    # choosing x = (d + nu - t)^2 / (4 (d + 2 nu)) lands the threshold at t
    for d, nu, t in [(20, 4.0, 11.0), (124, 496.0, 500.0), (6, 0.0, 2.5)]:
        x = lower_tail_exponent(d, nu, t)
        threshold, _ = chisq_noncentral_lower(d, nu, x)
        assert threshold == pytest.approx(t, abs=1e-9)


def test_noncentral_lower_vacuous_case():
    threshold, _ = chisq_noncentral_lower(20, 0.0, 5.0)
    assert threshold == pytest.approx(0.0, abs=1e-12)


def test_monotone_in_x():
    xs = [0.5, 1.0, 2.0, 4.0, 8.0]
    up = [chisq_noncentral_upper(16, 3.0, x) for x in xs]
    lo = [chisq_noncentral_lower(16, 3.0, x) for x in xs]
    assert all(a[0] < b[0] for a, b in zip(up, up[1:]))  # thresholds increase
    assert all(a[0] > b[0] for a, b in zip(lo, lo[1:]))  # thresholds decrease
    assert all(a[1] > b[1] for a, b in zip(up, up[1:]))  # bounds shrink


def test_domain_errors():
    with pytest.raises(ValueError):
        chisq_central_upper(10, 0.0)
    with pytest.raises(ValueError):
        chisq_central_lower(10, -1.0)
    with pytest.raises(ValueError):
        chisq_noncentral_upper(0, 1.0, 1.0)
    with pytest.raises(ValueError):
        chisq_noncentral_lower(4, -0.5, 1.0)


def test_binom_bounds_hand_values():
    lower, exact_log, upper = binom_bounds(10, 3)
    assert lower == pytest.approx((10 / 3) ** 3, rel=1e-12)
    assert exact_log == pytest.approx(math.log(120), rel=1e-12)
    assert upper == pytest.approx((10 * math.e / 3) ** 3, rel=1e-12)


def test_binom_bounds_k_equals_m():
    lower, exact_log, upper = binom_bounds(7, 7)
    assert lower == pytest.approx(1.0)
    assert exact_log == pytest.approx(0.0, abs=1e-12)
    assert upper == pytest.approx(math.e**7, rel=1e-12)


def test_binom_sandwich_exhaustive():
    assert verify_binom_sandwich(40)


def test_binom_domain_errors():
    with pytest.raises(ValueError):
        binom_bounds(5, 6)
    with pytest.raises(ValueError):
        binom_bounds(5, 0)
    with pytest.raises(ValueError):
        log_binom(5, -1)


def test_log_binom_exact_small_cases():
    for m in (1, 5, 17, 40, 128):
        for k in range(0, m + 1, max(1, m // 5)):
            exact = math.log(math.comb(m, k)) if math.comb(m, k) > 0 else 0.0
            assert log_binom(m, k) == pytest.approx(exact, abs=1e-10)
    # frozen: computed with exact integer arithmetic
    assert log_binom(128, 8) == pytest.approx(27.9884876031943, abs=1e-9)


def test_log_binom_symmetry_and_edge():
    assert log_binom(23, 0) == 0.0
    for m, k in [(9, 2), (30, 11), (101, 50)]:
        assert abs(log_binom(m, k) - log_binom(m, m - k)) < 1e-12


def test_noncentral_sampler_moments():
    rng = rng_stream(5, 0, 2)
    d, nu = 6, 4.0
    draws = sample_noncentral_chisq(d, nu, 200_000, rng)
    assert draws.mean() == pytest.approx(d + nu, rel=0.02)
    assert draws.var() == pytest.approx(2 * d + 4 * nu, rel=0.05)


def test_mc_domination_small_grid():
    checks = verify_tail_bounds(samples=100_000, seed=2, grid_d=(8,), grid_nu=(0.0, 2.0), grid_x=(0.5, 2.0))
    assert checks and all(c.passed for c in checks)


def test_mc_negative_control_fails():
    checks = verify_tail_bounds(samples=50_000, seed=3, grid_d=(8,), grid_nu=(0.0,), grid_x=(0.5,), break_one=True)
    assert any(not c.passed for c in checks)
