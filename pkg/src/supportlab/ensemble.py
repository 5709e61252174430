"""Problem-instance generation and the shared least-squares residual kernel.

Instances are standard Gaussian design matrices, exactly-sparse signals with
a fixed minimum magnitude, and observations contaminated by i.i.d. Gaussian
noise.  Every sampling routine is a pure function of a (seed, trial, stream)
triple, so whole experiment sweeps replay bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Stream tags keep design / signal / noise draws on independent Philox
# streams even when they share a (seed, trial) pair.
STREAM_DESIGN = 0
STREAM_SIGNAL = 1
STREAM_NOISE = 2

SIGN_MODES = ("all-positive", "random-sign")

# Columns whose residual direction carries less than this fraction of the
# original column norm are treated as linearly dependent and skipped.
PIVOT_RTOL = 1e-10

_MASK64 = (1 << 64) - 1


def rng_stream(seed: int, trial: int = 0, stream: int = STREAM_DESIGN) -> np.random.Generator:
    """Counter-based generator keyed by (seed, trial, stream).

    Philox is counter-based, so equal keys replay identical draws on any
    platform; normal variates use numpy's ziggurat sampler.  The trial index
    occupies the high bits of the second key word and the stream tag the low
    two bits, so distinct triples never collide.
    """
    key = np.array(
        [seed & _MASK64, ((trial << 2) | stream) & _MASK64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SparseSignal:
    """Exactly s-sparse vector stored as (support, values).

    `support` is strictly increasing, `values[i]` sits at coordinate
    `support[i]`, and every |value| >= min_magnitude with equality attained
    somewhere (here: everywhere, since magnitudes are homogeneous).
    """

    p: int
    support: np.ndarray
    values: np.ndarray
    min_magnitude: float

    def dense(self) -> np.ndarray:
        beta = np.zeros(self.p)
        beta[self.support] = self.values
        return beta

    @property
    def s(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class GramCache:
    """Precomputed X^T X, X^T y and ||y||^2 for repeated subset residuals.

    Lets f(U) = ||y||^2 - (X_U^T y)^T (X_U^T X_U)^{-1} (X_U^T y) be evaluated
    without touching X again: O(p^2) state independent of n.
    """

    gram: np.ndarray
    xty: np.ndarray
    y_sq: float
    n: int

    @property
    def p(self) -> int:
        return self.gram.shape[0]


def sample_design(n: int, p: int, seed: int, trial: int = 0) -> np.ndarray:
    """Draw an n x p matrix with i.i.d. N(0, 1) entries.

    Deterministic in (seed, trial): repeat calls are bit-identical.
    """
    if n < 1 or p < 1:
        raise ValueError(f"design needs n >= 1 and p >= 1, got n={n}, p={p}")
    rng = rng_stream(seed, trial, STREAM_DESIGN)
    return rng.standard_normal((n, p))


def sample_support(p: int, s: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform size-s subset of [0, p), sorted ascending."""
    idx = rng.choice(p, size=s, replace=False)
    idx.sort()
    return idx.astype(np.int64)


def sample_signal(
    p: int,
    s: int,
    min_magnitude: float,
    sign_mode: str = "all-positive",
    seed: int = 0,
    trial: int = 0,
) -> SparseSignal:
    """Draw a sparse signal with support uniform over all C(p, s) subsets.

    In "all-positive" mode every support value equals min_magnitude exactly
    (the restricted-ensemble convention); in "random-sign" mode values are
    +/- min_magnitude with independent fair signs.
    """
    if not 1 <= s <= p:
        raise ValueError(f"sparsity must satisfy 1 <= s <= p, got s={s}, p={p}")
    if min_magnitude <= 0:
        raise ValueError(f"min_magnitude must be positive, got {min_magnitude}")
    if sign_mode not in SIGN_MODES:
        raise ValueError(f"sign_mode must be one of {SIGN_MODES}, got {sign_mode!r}")
    rng = rng_stream(seed, trial, STREAM_SIGNAL)
    support = sample_support(p, s, rng)
    if sign_mode == "all-positive":
        values = np.full(s, float(min_magnitude))
    else:
        signs = np.where(rng.random(s) < 0.5, -1.0, 1.0)
        values = signs * float(min_magnitude)
    return SparseSignal(p=p, support=support, values=values, min_magnitude=float(min_magnitude))


def observe(
    X: np.ndarray,
    beta: SparseSignal,
    sigma: float = 1.0,
    seed: int = 0,
    trial: int = 0,
) -> np.ndarray:
    """Return y = X beta + W with W ~ N(0, sigma^2 I); sigma=0 is exact."""
    n, p = X.shape
    if beta.p != p:
        raise ValueError(f"signal dimension {beta.p} does not match design p={p}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    y = X[:, beta.support] @ beta.values
    if sigma > 0:
        rng = rng_stream(seed, trial, STREAM_NOISE)
        y = y + sigma * rng.standard_normal(n)
    return y


def perp_residual_sq(X_cols: np.ndarray, v: np.ndarray) -> float:
    """||P_perp v||^2 for the projector onto the complement of span(X_cols).

    Modified Gram-Schmidt on the columns; directions whose residual norm
    falls below PIVOT_RTOL of the original column norm are dependent and
    skipped, so the result stays the true minimum of ||v - X_cols b||^2.
    """
    Q = np.array(X_cols, dtype=float, copy=True)
    if Q.ndim == 1:
        Q = Q[:, None]
    r = np.array(v, dtype=float, copy=True)
    if Q.shape[0] != r.shape[0]:
        raise ValueError(
            f"column length {Q.shape[0]} does not match vector length {r.shape[0]}"
        )
    for j in range(Q.shape[1]):
        q = Q[:, j]
        scale = np.linalg.norm(q)
        for i in range(j):
            qi = Q[:, i]
            nq = qi @ qi
            if nq > 0.0:
                q = q - (qi @ q) / nq * qi
        if scale > 0.0 and np.linalg.norm(q) <= PIVOT_RTOL * scale:
            Q[:, j] = 0.0
            continue
        Q[:, j] = q
        nq = q @ q
        if nq > 0.0:
            r = r - (q @ r) / nq * q
    return float(r @ r)


def residual_sq(X_U: np.ndarray, y: np.ndarray) -> float:
    """min_b ||y - X_U b||^2, the subset least-squares residual f(U)."""
    return perp_residual_sq(X_U, y)


def gram_precompute(X: np.ndarray, y: np.ndarray) -> GramCache:
    """Build the Gram cache shared by all subset decoders."""
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError(f"observation length {y.shape} does not match design n={n}")
    return GramCache(gram=X.T @ X, xty=X.T @ y, y_sq=float(y @ y), n=n)


def residual_sq_from_cache(cache: GramCache, support: np.ndarray) -> float:
    """f(U) through the Gram cache, with the same dependent-column skipping.

    Cholesky with diagonal pivot guard: a pivot below PIVOT_RTOL^2 of the
    column's squared norm marks a dependent direction, which contributes
    nothing to the projection.
    """
    idx = np.asarray(support, dtype=np.int64)
    m = len(idx)
    G = cache.gram[np.ix_(idx, idx)]
    c = cache.xty[idx]
    # Left-looking Cholesky of G with pivot skipping; z = L^{-1} c over the
    # accepted pivots gives f = ||y||^2 - ||z||^2.
    L = np.zeros((m, m))
    z = np.zeros(m)
    active = np.zeros(m, dtype=bool)
    for j in range(m):
        # forward solve L[:j,:j] w = G[:j, j]; inactive rows stay zero
        w = np.zeros(j)
        for i in range(j):
            if not active[i]:
                continue
            w[i] = (G[i, j] - L[i, :i] @ w[:i]) / L[i, i]
        d2 = G[j, j] - w @ w
        if d2 <= (PIVOT_RTOL**2) * max(G[j, j], 0.0) or d2 <= 0.0:
            continue
        d = np.sqrt(d2)
        L[j, :j] = w
        L[j, j] = d
        z[j] = (c[j] - L[j, :j] @ z[:j]) / d
        active[j] = True
    f = cache.y_sq - float(z @ z)
    return max(f, 0.0)
