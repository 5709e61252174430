"""Compiled kernel: minimum subset residual over all s-subsets.

The enumeration walks the revolving-door Gray code, so consecutive subsets
differ by a single column swap and the Cholesky factor of the subset Gram
matrix is maintained by one row deletion (Givens sweep) plus one appended
row per step: O(s^2) per subset instead of O(s^3).

Everything operates on the Gram cache (G = X^T X, c = X^T y, ||y||^2); the
design matrix itself is never touched.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# A pivot d^2 below this fraction of the diagonal entry means the factor
# lost positive-definiteness; the subset is refactored from scratch before
# its residual is trusted.
_PIVOT_TOL = 1e-12


@njit(cache=True)
def _gray_step(c, s):
    """Advance the revolving-door state c[1..s] (sentinel c[s+1] = p).

    Returns (out_col, in_col); out_col == -1 signals exhaustion.  Every
    transition retires exactly one column and admits exactly one.
    """
    if s % 2 == 1:
        if c[1] + 1 < c[2]:
            o = c[1]
            c[1] += 1
            return o, c[1]
        j = 2
        at_r4 = True
    else:
        if c[1] > 0:
            o = c[1]
            c[1] -= 1
            return o, c[1]
        j = 2
        at_r4 = False
    while j <= s:
        if at_r4:
            # here c[j] == c[j-1] + 1
            if c[j] >= j:
                o = c[j]
                c[j] = c[j - 1]
                c[j - 1] = j - 2
                return o, np.int64(j - 2)
            j += 1
            at_r4 = False
        else:
            # here c[j-1] == j - 2
            if c[j] + 1 < c[j + 1]:
                o = c[j - 1]
                c[j - 1] = c[j]
                c[j] += 1
                return o, c[j]
            j += 1
            at_r4 = True
    return np.int64(-1), np.int64(-1)


@njit(cache=True)
def _refactor(G, cols, m, L, z, c_vec, active):
    """From-scratch pivoted Cholesky of G[cols, cols]; dependent columns skipped.

    Returns True when all m pivots were accepted, so the factor is usable
    for incremental updates; False when any direction was skipped.
    """
    clean = True
    for j in range(m):
        cj = cols[j]
        acc = 0.0
        for i in range(j):
            if active[i]:
                v = G[cols[i], cj]
                for t in range(i):
                    v -= L[i, t] * L[j, t]
                L[j, i] = v / L[i, i]
                acc += L[j, i] * L[j, i]
            else:
                L[j, i] = 0.0
        d2 = G[cj, cj] - acc
        if d2 <= _PIVOT_TOL * max(G[cj, cj], 1e-300):
            active[j] = False
            L[j, j] = 0.0
            z[j] = 0.0
            clean = False
            continue
        active[j] = True
        L[j, j] = np.sqrt(d2)
        v = c_vec[cj]
        for t in range(j):
            v -= L[j, t] * z[t]
        z[j] = v / L[j, j]
    return clean


@njit(cache=True)
def _delete_row(L, k, m):
    """Drop factor row k, restoring lower-triangular shape with Givens sweeps.

    After the row shift each trailing row carries one superdiagonal entry;
    column rotations (j, j+1) eliminate them without touching the Gram.
    """
    for r in range(k, m - 1):
        for t in range(m):
            L[r, t] = L[r + 1, t]
    for j in range(k, m - 1):
        a = L[j, j]
        b = L[j, j + 1]
        h = np.sqrt(a * a + b * b)
        if h <= 0.0:
            continue
        cth = a / h
        sth = b / h
        for r in range(j, m - 1):
            x0 = L[r, j]
            x1 = L[r, j + 1]
            L[r, j] = cth * x0 + sth * x1
            L[r, j + 1] = -sth * x0 + cth * x1
        if L[j, j] < 0.0:
            for r in range(j, m - 1):
                L[r, j] = -L[r, j]
    for r in range(m - 1):
        L[r, m - 1] = 0.0
    for t in range(m):
        L[m - 1, t] = 0.0


@njit(cache=True)
def _append_col(G, cols, m, L, col):
    """Append one column to a clean m-row factor; False if the pivot collapses."""
    acc = 0.0
    for i in range(m):
        v = G[cols[i], col]
        for t in range(i):
            v -= L[i, t] * L[m, t]
        L[m, i] = v / L[i, i]
        acc += L[m, i] * L[m, i]
    d2 = G[col, col] - acc
    if d2 <= _PIVOT_TOL * max(G[col, col], 1e-300):
        return False
    L[m, m] = np.sqrt(d2)
    return True


@njit(cache=True)
def _residual(L, z, c_vec, cols, m, active, y_sq):
    """Forward solve L z = c over active rows; f = ||y||^2 - ||z||^2."""
    acc = 0.0
    for j in range(m):
        if not active[j]:
            z[j] = 0.0
            continue
        v = c_vec[cols[j]]
        for t in range(j):
            v -= L[j, t] * z[t]
        z[j] = v / L[j, j]
        acc += z[j] * z[j]
    return y_sq - acc


@njit(cache=True)
def _swap_update(G, c_vec, y_sq, cols, pos, L, z, active, s, out_col, in_col, clean):
    """Apply one Gray-code swap to the factor state; returns (f, clean)."""
    k = pos[out_col]
    for t in range(k, s - 1):
        cols[t] = cols[t + 1]
        pos[cols[t]] = t
    pos[out_col] = -1
    if clean:
        _delete_row(L, k, s)
        ok = _append_col(G, cols, s - 1, L, in_col)
        cols[s - 1] = in_col
        pos[in_col] = s - 1
        if ok:
            f = _residual(L, z, c_vec, cols, s, active, y_sq)
            if np.isfinite(f):
                return f, True
        for t in range(s):
            active[t] = True
        clean = _refactor(G, cols, s, L, z, c_vec, active)
        f = _residual(L, z, c_vec, cols, s, active, y_sq)
        return f, clean
    cols[s - 1] = in_col
    pos[in_col] = s - 1
    for t in range(s):
        active[t] = True
    clean = _refactor(G, cols, s, L, z, c_vec, active)
    f = _residual(L, z, c_vec, cols, s, active, y_sq)
    return f, clean


@njit(cache=True)
def _lex_less(a, b, s):
    for i in range(s):
        if a[i] < b[i]:
            return True
        if a[i] > b[i]:
            return False
    return False


@njit(cache=True)
def _sorted_copy(cols, s, out):
    for i in range(s):
        out[i] = cols[i]
    for i in range(1, s):
        v = out[i]
        j = i - 1
        while j >= 0 and out[j] > v:
            out[j + 1] = out[j]
            j -= 1
        out[j + 1] = v


@njit(cache=True)
def enumerate_min_residual(G, c_vec, y_sq, s, tol):
    """Scan all C(p, s) subsets; return the minimizer of f(U).

    Returns (best_sorted, f_min, tie_count, evaluated, dirty).  Ties are
    subsets with f - f_min <= tol * max(1, |f_min|); the lexicographically
    smallest sorted index sequence wins.  `dirty` means the running minimum
    once improved by less than the tie slack, so earlier candidates may
    still qualify: the caller must re-count with count_ties().
    """
    p = G.shape[0]
    cols = np.empty(s, dtype=np.int64)
    pos = np.full(p, -1, dtype=np.int64)
    L = np.zeros((s, s))
    z = np.zeros(s)
    active = np.ones(s, dtype=np.bool_)
    best = np.empty(s, dtype=np.int64)
    cur = np.empty(s, dtype=np.int64)

    for i in range(s):
        cols[i] = i
        pos[i] = i
        best[i] = i
    clean = _refactor(G, cols, s, L, z, c_vec, active)
    f_min = _residual(L, z, c_vec, cols, s, active, y_sq)
    tie_count = 1
    evaluated = 1
    dirty = False

    c = np.empty(s + 2, dtype=np.int64)
    for j in range(1, s + 1):
        c[j] = j - 1
    c[s + 1] = p

    while True:
        out_col, in_col = _gray_step(c, s)
        if out_col < 0:
            break
        f, clean = _swap_update(
            G, c_vec, y_sq, cols, pos, L, z, active, s, out_col, in_col, clean
        )
        evaluated += 1
        if f < f_min:
            if f_min - f <= tol * max(1.0, abs(f)):
                dirty = True
            f_min = f
            _sorted_copy(cols, s, best)
            tie_count = 1
        elif f - f_min <= tol * max(1.0, abs(f_min)):
            tie_count += 1
            _sorted_copy(cols, s, cur)
            if _lex_less(cur, best, s):
                for i in range(s):
                    best[i] = cur[i]

    return best, f_min, tie_count, evaluated, dirty


@njit(cache=True)
def count_ties(G, c_vec, y_sq, s, f_min, tol):
    """Second pass: exact tie count and lex-smallest subset at a fixed f_min."""
    p = G.shape[0]
    cols = np.empty(s, dtype=np.int64)
    pos = np.full(p, -1, dtype=np.int64)
    L = np.zeros((s, s))
    z = np.zeros(s)
    active = np.ones(s, dtype=np.bool_)
    best = np.full(s, p, dtype=np.int64)
    cur = np.empty(s, dtype=np.int64)
    slack = tol * max(1.0, abs(f_min))
    tie_count = 0

    for i in range(s):
        cols[i] = i
        pos[i] = i
    clean = _refactor(G, cols, s, L, z, c_vec, active)
    f = _residual(L, z, c_vec, cols, s, active, y_sq)
    if f - f_min <= slack:
        tie_count = 1
        _sorted_copy(cols, s, best)

    c = np.empty(s + 2, dtype=np.int64)
    for j in range(1, s + 1):
        c[j] = j - 1
    c[s + 1] = p

    while True:
        out_col, in_col = _gray_step(c, s)
        if out_col < 0:
            break
        f, clean = _swap_update(
            G, c_vec, y_sq, cols, pos, L, z, active, s, out_col, in_col, clean
        )
        if f - f_min <= slack:
            tie_count += 1
            _sorted_copy(cols, s, cur)
            if _lex_less(cur, best, s):
                for i in range(s):
                    best[i] = cur[i]

    return best, tie_count
