"""Closed-form chi-square concentration bounds and binomial-coefficient bounds.

Each tail function returns a (threshold, prob_bound) pair with the contract
P[X beyond threshold] <= prob_bound for the stated chi-square family, plus
Monte Carlo verifiers that check domination empirically.  Bound arithmetic
elsewhere works with the log form (the exponent -x) to avoid underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import rng_stream


def _check_dx(d: int, x: float, nu: float = 0.0) -> None:
    if d < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {d}")
    if x <= 0:
        raise ValueError(f"deviation parameter must be positive, got {x}")
    if nu < 0:
        raise ValueError(f"non-centrality must be nonnegative, got {nu}")


def chisq_central_upper(d: int, x: float) -> tuple[float, float]:
    """P[X >= d + 2 sqrt(d x) + 2 x] <= exp(-x) for X ~ chi^2_d."""
    _check_dx(d, x)
    return d + 2.0 * math.sqrt(d * x) + 2.0 * x, math.exp(-x)


def chisq_central_lower(d: int, x: float) -> tuple[float, float]:
    """P[X <= d - 2 sqrt(d x)] <= exp(-x) for X ~ chi^2_d."""
    _check_dx(d, x)
    return d - 2.0 * math.sqrt(d * x), math.exp(-x)


def chisq_noncentral_upper(d: int, nu: float, x: float) -> tuple[float, float]:
    """P[X >= (d+nu) + 2 sqrt((d+2nu) x) + 2x] <= exp(-x), X ~ chi^2_d(nu)."""
    _check_dx(d, x, nu)
    return (d + nu) + 2.0 * math.sqrt((d + 2.0 * nu) * x) + 2.0 * x, math.exp(-x)


def chisq_noncentral_lower(d: int, nu: float, x: float) -> tuple[float, float]:
    """P[X <= (d+nu) - 2 sqrt((d+2nu) x)] <= exp(-x), X ~ chi^2_d(nu).

    Inverting for a target threshold t <= d + nu: choosing
    x = (d + nu - t)^2 / (4 (d + 2 nu)) puts the threshold at or below t.
    """
    _check_dx(d, x, nu)
    return (d + nu) - 2.0 * math.sqrt((d + 2.0 * nu) * x), math.exp(-x)


def lower_tail_exponent(d: int, nu: float, t: float) -> float:
    """The x making chisq_noncentral_lower's threshold land at t (t <= d + nu)."""
    gap = d + nu - t
    if gap < 0:
        raise ValueError(f"target {t} exceeds the mean {d + nu}")
    return gap * gap / (4.0 * (d + 2.0 * nu))


def binom_bounds(m: int, k: int) -> tuple[float, float, float]:
    """(m/k)^k <= C(m, k) <= (m e / k)^k, with the exact log in the middle.

    Returns (lower, exact_log, upper); the outer values overflow to inf for
    huge m, the log never does.
    """
    if not 0 < k <= m:
        raise ValueError(f"need 0 < k <= m, got m={m}, k={k}")
    lower = math.exp(k * math.log(m / k)) if k * math.log(m / k) < 709 else math.inf
    upper_log = k * (math.log(m / k) + 1.0)
    upper = math.exp(upper_log) if upper_log < 709 else math.inf
    return lower, log_binom(m, k), upper


def log_binom(m: int, k: int) -> float:
    """log C(m, k) through log-gamma; exact to ~1e-10 relative for m <= 1e6."""
    if not 0 <= k <= m:
        raise ValueError(f"need 0 <= k <= m, got m={m}, k={k}")
    return math.lgamma(m + 1) - math.lgamma(k + 1) - math.lgamma(m - k + 1)


def sample_noncentral_chisq(
    d: int, nu: float, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Exact draws: (Z_1 + sqrt(nu))^2 + sum of d-1 squared standard normals."""
    out = (rng.standard_normal(size) + math.sqrt(nu)) ** 2
    if d > 1:
        out += rng.chisquare(d - 1, size)
    return out


@dataclass(frozen=True)
class TailCheck:
    """One cell of the Monte Carlo domination grid."""

    bound: str
    d: int
    nu: float
    x: float
    threshold: float
    prob_bound: float
    empirical: float
    stderr: float
    passed: bool


_BOUNDS = {
    "central-upper": lambda d, nu, x: chisq_central_upper(d, x),
    "central-lower": lambda d, nu, x: chisq_central_lower(d, x),
    "noncentral-upper": chisq_noncentral_upper,
    "noncentral-lower": chisq_noncentral_lower,
}

MC_GRID_D = (4, 16, 64)
MC_GRID_NU = (0.0, 5.0)
MC_GRID_X = (0.5, 2.0, 8.0)


def verify_tail_bounds(
    samples: int = 10**6,
    seed: int = 0,
    grid_d=MC_GRID_D,
    grid_nu=MC_GRID_NU,
    grid_x=MC_GRID_X,
    break_one: bool = False,
) -> list[TailCheck]:
    """MC domination sweep: empirical tail <= exp(-x) + 3 standard errors.

    Central bounds are checked at nu = 0 only (they are the nu = 0 case).
    `break_one` flips the first threshold the wrong way, as a negative
    control that the harness can actually fail.
    """
    checks = []
    chunk = 200_000
    first = True
    for d in grid_d:
        for nu in grid_nu:
            rng = rng_stream(seed, trial=d * 1000 + int(nu), stream=2)
            draws = []
            remaining = samples
            while remaining > 0:
                take = min(chunk, remaining)
                draws.append(sample_noncentral_chisq(d, nu, take, rng))
                remaining -= take
            sample = np.concatenate(draws)
            for name, fn in _BOUNDS.items():
                if name.startswith("central") and nu != 0.0:
                    continue
                for x in grid_x:
                    threshold, prob = fn(d, nu, x)
                    if break_one and first:
                        threshold = threshold - 4.0 * math.sqrt(d + 2 * nu) if "upper" in name else threshold + 4.0
                        first = False
                    if "upper" in name:
                        hits = int(np.count_nonzero(sample >= threshold))
                    else:
                        hits = int(np.count_nonzero(sample <= threshold))
                    emp = hits / samples
                    stderr = math.sqrt(max(emp * (1 - emp), 1.0 / samples) / samples)
                    checks.append(
                        TailCheck(
                            bound=name,
                            d=d,
                            nu=nu,
                            x=x,
                            threshold=threshold,
                            prob_bound=prob,
                            empirical=emp,
                            stderr=stderr,
                            passed=emp <= prob + 3.0 * stderr,
                        )
                    )
    return checks


def verify_binom_sandwich(m_max: int = 40) -> bool:
    """lower <= C(m, k) <= upper exhaustively for all 1 <= k <= m <= m_max."""
    for m in range(1, m_max + 1):
        for k in range(1, m + 1):
            lower, exact_log, upper = binom_bounds(m, k)
            exact = math.comb(m, k)
            if not (lower <= exact * (1 + 1e-12) and exact <= upper * (1 + 1e-12)):
                return False
            if abs(exact_log - math.log(exact)) > 1e-10 * max(1.0, abs(math.log(exact))):
                return False
    return True
