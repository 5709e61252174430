"""Support-set decoders: the optimal exhaustive rule and tractable baselines.

The exhaustive decoder minimizes the least-squares residual f(U) over all
C(p, s) subsets of size s, which is the error-probability-optimal rule for
this observation model.  OMP and a coordinate-descent Lasso are included as
cheap baselines for the comparison experiments.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _enumeration
from .ensemble import (
    GramCache,
    SparseSignal,
    perp_residual_sq,
    residual_sq_from_cache,
)

DEFAULT_TIE_TOL = 1e-9
DEFAULT_BUDGET = 10**8


class EnumerationBudgetError(RuntimeError):
    """C(p, s) exceeds the configured enumeration budget."""

    def __init__(self, p: int, s: int, count: int, budget: int):
        self.count = count
        self.budget = budget
        super().__init__(
            f"C({p}, {s}) = {count} subsets exceeds the enumeration budget {budget}"
        )


@dataclass(frozen=True)
class DecodeResult:
    estimate: np.ndarray
    min_residual: float
    tie_count: int
    subsets_evaluated: int
    elapsed: float
    converged: bool = True


@dataclass(frozen=True)
class PairwiseStatistic:
    """f(U) - f(S) computed through the projection form."""

    delta: float
    subset: np.ndarray
    overlap_complement: int


def decode_exhaustive(
    cache: GramCache,
    s: int,
    tolerance: float = DEFAULT_TIE_TOL,
    budget: int = DEFAULT_BUDGET,
) -> DecodeResult:
    """Minimize f(U) over every size-s subset.

    Ties within `tolerance` (relative to max(1, f_min)) are broken toward
    the lexicographically smallest sorted index sequence.  Refuses outright
    when C(p, s) exceeds `budget` rather than running unbounded.
    """
    p = cache.p
    if not 1 <= s <= p:
        raise ValueError(f"sparsity must satisfy 1 <= s <= p, got s={s}, p={p}")
    if tolerance < 0:
        raise ValueError(f"tolerance must be nonnegative, got {tolerance}")
    count = math.comb(p, s)
    if count > budget:
        raise EnumerationBudgetError(p, s, count, budget)
    if s > cache.n:
        warnings.warn(
            f"s={s} exceeds n={cache.n}; every subset is rank-deficient",
            stacklevel=2,
        )
    start = time.perf_counter()
    best, f_min, tie_count, evaluated, dirty = _enumeration.enumerate_min_residual(
        cache.gram, cache.xty, cache.y_sq, s, tolerance
    )
    if dirty:
        best, tie_count = _enumeration.count_ties(
            cache.gram, cache.xty, cache.y_sq, s, f_min, tolerance
        )
    elapsed = time.perf_counter() - start
    return DecodeResult(
        estimate=np.asarray(best, dtype=np.int64),
        min_residual=max(float(f_min), 0.0),
        tie_count=int(tie_count),
        subsets_evaluated=int(evaluated),
        elapsed=elapsed,
    )


def delta_statistic(
    X: np.ndarray,
    y: np.ndarray,
    beta: SparseSignal,
    U: np.ndarray,
) -> PairwiseStatistic:
    """Pairwise statistic Delta(U) = ||P_U^perp (X_{S\\U} b_{S\\U} + W)||^2 - ||P_S^perp W||^2.

    W is recovered as y - X beta.  Delta(U) < 0 is exactly the event that
    the exhaustive decoder prefers U over the true support S, and Delta(U)
    equals f(U) - f(S).
    """
    U = np.asarray(U, dtype=np.int64)
    S = beta.support
    s = len(S)
    if len(U) != s:
        raise ValueError(f"candidate subset size {len(U)} != s = {s}")
    if len(set(U.tolist())) != s:
        raise ValueError("candidate subset has repeated indices")
    if np.array_equal(np.sort(U), S):
        return PairwiseStatistic(delta=0.0, subset=np.sort(U), overlap_complement=0)
    w = y - X[:, S] @ beta.values
    mask = ~np.isin(S, U)
    leftover = S[mask]
    v = X[:, leftover] @ beta.values[mask] + w
    delta = perp_residual_sq(X[:, U], v) - perp_residual_sq(X[:, S], w)
    return PairwiseStatistic(
        delta=float(delta),
        subset=np.sort(U),
        overlap_complement=int(mask.sum()),
    )


def decode_omp(cache: GramCache, s: int) -> DecodeResult:
    """Orthogonal matching pursuit through the Gram cache.

    Greedily picks the column with the largest absolute correlation with
    the current residual, refitting by least squares each round; exact index
    ties go to the smallest index (np.argmax takes the first maximum).
    """
    p = cache.p
    if not 1 <= s <= p:
        raise ValueError(f"sparsity must satisfy 1 <= s <= p, got s={s}, p={p}")
    start = time.perf_counter()
    selected: list[int] = []
    coef = np.zeros(0)
    available = np.ones(p, dtype=bool)
    for _ in range(s):
        corr = cache.xty.copy()
        if selected:
            corr -= cache.gram[:, selected] @ coef
        corr[~available] = 0.0
        j = int(np.argmax(np.abs(corr)))
        selected.append(j)
        available[j] = False
        G_sel = cache.gram[np.ix_(selected, selected)]
        c_sel = cache.xty[selected]
        coef = _solve_psd(G_sel, c_sel)
    estimate = np.array(sorted(selected), dtype=np.int64)
    f = residual_sq_from_cache(cache, estimate)
    elapsed = time.perf_counter() - start
    return DecodeResult(
        estimate=estimate,
        min_residual=f,
        tie_count=1,
        subsets_evaluated=s,
        elapsed=elapsed,
    )


def _solve_psd(G: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Least-squares coefficients for a (possibly singular) Gram system."""
    try:
        return np.linalg.solve(G, c)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(G, c, rcond=None)[0]


def default_lambda_grid(X: np.ndarray, y: np.ndarray, num: int = 50) -> np.ndarray:
    """Log-spaced path from ||X^T y||_inf down to 1e-3 of it."""
    lam_max = float(np.max(np.abs(X.T @ y)))
    if lam_max <= 0.0:
        lam_max = 1.0
    return np.geomspace(lam_max, 1e-3 * lam_max, num)


def decode_lasso(
    X: np.ndarray,
    y: np.ndarray,
    s: int,
    lambda_grid: np.ndarray | None = None,
    max_sweeps: int = 10**5,
    conv_tol: float = 1e-10,
) -> DecodeResult:
    """Lasso path decoder: support of size s from a coordinate-descent path.

    Runs cyclic coordinate descent on 0.5 ||y - X b||^2 + lam ||b||_1 with
    warm starts down the grid and stops at the largest lambda whose solution
    has exactly s nonzeros (|b_j| > 1e-8).  If no grid point gives exactly s
    nonzeros, the s largest-magnitude coordinates at the final grid point
    are taken instead (index ties toward smaller indices, so y = 0 yields
    the s smallest indices).
    """
    n, p = X.shape
    if not 1 <= s <= p:
        raise ValueError(f"sparsity must satisfy 1 <= s <= p, got s={s}, p={p}")
    if y.shape != (n,):
        raise ValueError(f"observation length {y.shape} does not match design n={n}")
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(X, y)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if len(lambda_grid) == 0 or np.any(lambda_grid <= 0) or np.any(np.diff(lambda_grid) >= 0):
        raise ValueError("lambda_grid must be nonempty, positive, strictly decreasing")

    start = time.perf_counter()
    gram = X.T @ X
    xty = X.T @ y
    col_sq = np.diag(gram).copy()
    col_sq[col_sq <= 0.0] = 1.0
    beta = np.zeros(p)
    rho = xty.copy()  # rho = X^T (y - X beta), kept current coordinate-wise
    converged = True
    chosen = None
    for lam in lambda_grid:
        ok = _cd_sweeps(gram, col_sq, beta, rho, lam, max_sweeps, conv_tol)
        converged = converged and ok
        nnz = np.abs(beta) > 1e-8
        if int(nnz.sum()) == s:
            chosen = np.flatnonzero(nnz)
            break
    if chosen is None:
        order = np.lexsort((np.arange(p), -np.abs(beta)))
        chosen = np.sort(order[:s])
    estimate = np.asarray(chosen, dtype=np.int64)
    f = perp_residual_sq(X[:, estimate], y)
    elapsed = time.perf_counter() - start
    return DecodeResult(
        estimate=estimate,
        min_residual=f,
        tie_count=1,
        subsets_evaluated=len(lambda_grid),
        elapsed=elapsed,
        converged=converged,
    )


@njit(cache=True)
def _cd_sweeps(gram, col_sq, beta, rho, lam, max_sweeps, conv_tol):
    """Cyclic coordinate descent at one lambda; returns False on sweep-cap hit.

    rho tracks X^T (y - X beta) and is updated in place per coordinate move.
    """
    p = len(beta)
    for _ in range(max_sweeps):
        max_change = 0.0
        for j in range(p):
            old = beta[j]
            u = rho[j] + col_sq[j] * old
            mag = abs(u) - lam
            new = (mag if u >= 0.0 else -mag) / col_sq[j] if mag > 0.0 else 0.0
            if new != old:
                beta[j] = new
                diff = new - old
                for i in range(p):
                    rho[i] -= diff * gram[i, j]
                change = abs(diff)
                if change > max_change:
                    max_change = change
        if max_change < conv_tol:
            return True
    return False
