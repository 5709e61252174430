"""Recovery bounds: pairwise error exponents, union bounds, sample-size
thresholds, pairwise KL divergences, and Fano lower bounds.

All probability arithmetic is done in the log domain; exponentiation only
happens at reporting boundaries, so union bounds stay meaningful even when
individual terms sit near exp(-1000).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .tails import log_binom

DEFAULT_C = 24.0
DEFAULT_CPRIME = 0.25
UNION_FORMS = ("exact-lemma2", "simplified")

# Fano bounds need every subset pair; cap the hypothesis count so nobody
# asks for a dense C(p, s)^2 matrix by accident.
KL_MATRIX_MAX_HYPOTHESES = 20_000


def overlap_count(p: int, s: int, k: int) -> int:
    """Number of size-s subsets U with |S \\ U| = k for a fixed size-s S.

    Equals C(s, k) * C(p - s, k); zero when k > p - s.
    """
    if not 0 <= k <= s:
        raise ValueError(f"need 0 <= k <= s, got k={k}, s={s}")
    if not 1 <= s <= p:
        raise ValueError(f"need 1 <= s <= p, got s={s}, p={p}")
    if k > p - s:
        return 0
    return math.comb(s, k) * math.comb(p - s, k)


def pairwise_error_bound(n: int, s: int, k: int, beta_norm_sq: float) -> float:
    """Log of the two-term pairwise error bound for a subset with |S\\U| = k.

    log[ exp{-(n-s) b / (12 (b + 4))} + 2 exp{-(k/4) (-1 + (n-s) b / (4k))^2} ]
    with b = ||beta_{S\\U}||^2; the bracket is used as written even when
    negative (the term is then weak).  Clipped at 0 since it bounds a
    probability.
    """
    if not 1 <= k <= s or s >= n:
        raise ValueError(f"need 1 <= k <= s < n, got k={k}, s={s}, n={n}")
    if beta_norm_sq <= 0:
        raise ValueError(f"beta_norm_sq must be positive, got {beta_norm_sq}")
    b = beta_norm_sq
    t1 = -(n - s) * b / (12.0 * (b + 4.0))
    bracket = -1.0 + (n - s) * b / (4.0 * k)
    t2 = math.log(2.0) - (k / 4.0) * bracket * bracket
    return min(_logaddexp(t1, t2), 0.0)


def simplified_pairwise_bound(n: int, s: int, k: int, m2: float) -> tuple[float, bool]:
    """Subset-independent weakening: log 3 - (n-s) k m2 / (12 (k m2 + 8)).

    The second element flags the regime in which the weakening chain is
    justified, operationalized as (n - s) m2 / 4 >= 3.
    """
    if not 1 <= k <= s or s >= n:
        raise ValueError(f"need 1 <= k <= s < n, got k={k}, s={s}, n={n}")
    if m2 <= 0:
        raise ValueError(f"m2 must be positive, got {m2}")
    log_bound = math.log(3.0) - (n - s) * k * m2 / (12.0 * (k * m2 + 8.0))
    return log_bound, (n - s) * m2 / 4.0 >= 3.0


@dataclass(frozen=True)
class PerKTerm:
    k: int
    count: int
    log_pairwise: float
    log_term: float


@dataclass(frozen=True)
class UnionBound:
    """Union bound over all competing subsets, grouped by overlap complement."""

    log_value: float  # raw log of the sum, may exceed 0
    value: float  # exp(log_value) clipped to [0, 1]
    regime_valid: bool
    form: str
    per_k: tuple[PerKTerm, ...]


def union_error_bound(
    n: int, p: int, s: int, m2: float, form: str = "exact-lemma2"
) -> UnionBound:
    """Sum_k N(k) * pairwise_bound(k) in log-sum-exp arithmetic.

    "exact-lemma2" evaluates the two-term pairwise bound at the worst-case
    energy ||beta_{S\\U}||^2 = k m2; "simplified" uses the single-exponential
    weakening.  regime_valid reports whether every exponent is in its
    intended regime: bracket nonnegative for the exact form ((n-s) m2 >= 4),
    the weakening chain condition ((n-s) m2 >= 12) for the simplified form.
    """
    if form not in UNION_FORMS:
        raise ValueError(f"form must be one of {UNION_FORMS}, got {form!r}")
    if not 1 <= s < p:
        raise ValueError(f"need 1 <= s < p, got s={s}, p={p}")
    if s >= n:
        raise ValueError(f"need s < n, got s={s}, n={n}")
    terms = []
    log_terms = []
    for k in range(1, s + 1):
        count = overlap_count(p, s, k)
        if form == "exact-lemma2":
            log_pair = pairwise_error_bound(n, s, k, k * m2)
        else:
            log_pair, _ = simplified_pairwise_bound(n, s, k, m2)
        log_term = math.log(count) + log_pair if count > 0 else -math.inf
        terms.append(PerKTerm(k=k, count=count, log_pairwise=log_pair, log_term=log_term))
        if count > 0:
            log_terms.append(log_term)
    log_value = _logsumexp(log_terms)
    if form == "exact-lemma2":
        regime_valid = (n - s) * m2 >= 4.0
    else:
        regime_valid = (n - s) * m2 >= 12.0
    return UnionBound(
        log_value=log_value,
        value=math.exp(min(log_value, 0.0)),
        regime_valid=regime_valid,
        form=form,
        per_k=tuple(terms),
    )


def sufficient_n(p: int, s: int, m2: float, C: float = DEFAULT_C) -> float:
    """Sample-size threshold C max{s log(p/s), log(p-s)/m2} for reliable recovery."""
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    if not 1 <= s < p:
        raise ValueError(f"need 1 <= s < p, got s={s}, p={p}")
    if m2 <= 0:
        raise ValueError(f"m2 must be positive, got {m2}")
    return C * max(s * math.log(p / s), math.log(p - s) / m2)


def necessary_n(p: int, s: int, m2: float, Cprime: float = DEFAULT_CPRIME) -> float:
    """Sample sizes below (Cprime / m2) log(p/s) defeat every decoder."""
    if Cprime <= 0:
        raise ValueError(f"Cprime must be positive, got {Cprime}")
    if not 1 <= s < p:
        raise ValueError(f"need 1 <= s < p, got s={s}, p={p}")
    if m2 <= 0:
        raise ValueError(f"m2 must be positive, got {m2}")
    return (Cprime / m2) * math.log(p / s)


def gamma_uv(s: int, overlap: int, m2: float) -> float:
    """Scale factor of the pairwise divergence statistic: 2 m2 (s - |U ∩ V|)."""
    if not 0 <= overlap <= s:
        raise ValueError(f"need 0 <= overlap <= s, got overlap={overlap}, s={s}")
    return 2.0 * m2 * (s - overlap)


def kl_pairwise(X: np.ndarray, U: np.ndarray, V: np.ndarray, magnitude: float) -> float:
    """0.5 ||X_U v - X_V v||^2 for v = magnitude * ones, on the realized X.

    This is the KL divergence between the two Gaussian observation laws in
    the restricted (equal-magnitude) hypothesis family.
    """
    U = np.asarray(U, dtype=np.int64)
    V = np.asarray(V, dtype=np.int64)
    if len(U) != len(V):
        raise ValueError(f"subset sizes differ: {len(U)} vs {len(V)}")
    if U.max(initial=-1) >= X.shape[1] or V.max(initial=-1) >= X.shape[1]:
        raise ValueError("subset index out of range")
    diff = X[:, U].sum(axis=1) - X[:, V].sum(axis=1)
    return 0.5 * magnitude * magnitude * float(diff @ diff)


def kl_matrix(X: np.ndarray, s: int, magnitude: float) -> np.ndarray:
    """Dense KL matrix over all C(p, s) restricted hypotheses.

    Row/column i corresponds to the i-th subset in lexicographic order.
    """
    p = X.shape[1]
    N = math.comb(p, s)
    if N > KL_MATRIX_MAX_HYPOTHESES:
        raise ValueError(
            f"C({p}, {s}) = {N} hypotheses exceeds the KL matrix cap "
            f"{KL_MATRIX_MAX_HYPOTHESES}"
        )
    sums = np.empty((N, X.shape[0]))
    for i, U in enumerate(combinations(range(p), s)):
        sums[i] = X[:, U].sum(axis=1)
    sq = np.sum(sums * sums, axis=1)
    cross = sums @ sums.T
    return 0.5 * magnitude * magnitude * np.maximum(sq[:, None] + sq[None, :] - 2.0 * cross, 0.0)


def fano_bound_exact(kl: np.ndarray) -> float:
    """Multiway-testing error lower bound from the full divergence matrix.

    1 - [ (1/N^2) sum_{ij} D_ij + log 2 ] / log(N - 1); may be negative
    (vacuous), never exceeds 1.  Applies to any decoder on the N-hypothesis
    family with uniform prior.
    """
    kl = np.asarray(kl, dtype=float)
    if kl.ndim != 2 or kl.shape[0] != kl.shape[1]:
        raise ValueError(f"kl matrix must be square, got shape {kl.shape}")
    N = kl.shape[0]
    if N <= 2:
        raise ValueError(f"need at least 3 hypotheses, got {N}")
    if np.any(kl < 0) or np.any(np.abs(np.diag(kl)) > 1e-12):
        raise ValueError("kl matrix must be nonnegative with a zero diagonal")
    avg = float(kl.sum()) / (N * N)
    return 1.0 - (avg + math.log(2.0)) / math.log(N - 1)


def fano_bound_ensemble(n: int, p: int, s: int, m2: float) -> float:
    """Design-averaged Fano bound: 1 - (4 m2 s n + log 2) / log(C(p, s) - 1).

    Holds for at least half of design realizations (the divergence average
    concentrates by Markov); per-realization statements should use
    fano_bound_exact on the realized KL matrix.
    """
    N = math.comb(p, s)
    if N <= 2:
        raise ValueError(f"need C(p, s) >= 3, got {N}")
    if m2 <= 0:
        raise ValueError(f"m2 must be positive, got {m2}")
    lb = log_binom(p, s)
    log_nm1 = lb + math.log1p(-math.exp(-lb))
    return 1.0 - (4.0 * m2 * s * n + math.log(2.0)) / log_nm1


def markov_z_tail(n: int, s: int, m2: float) -> tuple[float, float]:
    """Threshold 4 m2 s n with P[Z >= threshold] <= 1/2 for the divergence average.

    Z is the all-pairs average of ||X_U v - X_V v||^2 over the restricted
    family; its mean is at most 2 m2 s n, so Markov at twice the mean gives
    probability 1/2.
    """
    if n < 1 or s < 1 or m2 < 0:
        raise ValueError(f"invalid sizes n={n}, s={s}, m2={m2}")
    return 4.0 * m2 * s * n, 0.5


def z_statistic(X: np.ndarray, s: int, magnitude: float) -> float:
    """Realized Z = (1/N^2) sum_{U != V} ||X_U v - X_V v||^2 for one design."""
    D = kl_matrix(X, s, magnitude)
    N = D.shape[0]
    return 2.0 * float(D.sum()) / (N * N)


@dataclass(frozen=True)
class BoundReport:
    """Every bound-level quantity for one (n, p, s, m2) point.

    The union fields are None when n <= s (the pairwise bound has no
    content there); the Fano and threshold quantities are always present.
    """

    n: int
    p: int
    s: int
    m2: float
    union_bound: float | None
    union_log: float | None
    union_regime_valid: bool
    union_form: str
    per_k: tuple[PerKTerm, ...]
    sufficient_n: float
    necessary_n: float
    fano_ensemble: float
    fano_exact: float | None
    C: float
    Cprime: float


def compute_bound_report(
    n: int,
    p: int,
    s: int,
    m2: float,
    C: float = DEFAULT_C,
    Cprime: float = DEFAULT_CPRIME,
    union_form: str = "exact-lemma2",
    fano_exact: float | None = None,
) -> BoundReport:
    """Assemble the full report; fano_exact is attached when the caller has
    computed it from a realized design."""
    if n > s:
        union = union_error_bound(n, p, s, m2, form=union_form)
        union_value, union_log = union.value, union.log_value
        union_valid, per_k = union.regime_valid, union.per_k
    else:
        union_value, union_log, union_valid, per_k = None, None, False, ()
    return BoundReport(
        n=n,
        p=p,
        s=s,
        m2=m2,
        union_bound=union_value,
        union_log=union_log,
        union_regime_valid=union_valid,
        union_form=union_form,
        per_k=per_k,
        sufficient_n=sufficient_n(p, s, m2, C),
        necessary_n=necessary_n(p, s, m2, Cprime),
        fano_ensemble=fano_bound_ensemble(n, p, s, m2),
        fano_exact=fano_exact,
        C=C,
        Cprime=Cprime,
    )


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _logsumexp(vals: list[float]) -> float:
    finite = [v for v in vals if v > -math.inf]
    if not finite:
        return -math.inf
    hi = max(finite)
    return hi + math.log(sum(math.exp(v - hi) for v in finite))
