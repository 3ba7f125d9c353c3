"""Hot inner loops, each with a numba version and a pure-numpy twin.

The public entry points at the bottom dispatch on ``_accel.USE_NUMBA``. Both
paths compute identical results (the numpy twins are the reference used by
the tests and the benchmark).
"""

import numpy as np

from . import _accel
from ._accel import njit

OPTIMAL, UNBOUNDED, ITER_LIMIT = 0, 1, 2


# ---------------------------------------------------------------------------
# dense tableau simplex
# ---------------------------------------------------------------------------

def _simplex_numpy(T, basis, eps, max_iter, bland_after):
    """Primal simplex on tableau ``T`` (last row reduced costs, last col rhs).

    Dantzig's rule, switching to Bland's rule after ``bland_after``
    consecutive degenerate pivots. Works on float and object (Fraction)
    arrays alike. Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    streak = 0
    for it in range(max_iter):
        obj = T[m, :-1]
        if streak >= bland_after:
            cand = np.nonzero(obj < -eps)[0]
            if cand.size == 0:
                return OPTIMAL, it
            c = int(cand[0])
        else:
            c = int(np.argmin(obj))
            if not obj[c] < -eps:
                return OPTIMAL, it
        col = T[:m, c]
        pos = np.nonzero(col > eps)[0]
        if pos.size == 0:
            return UNBOUNDED, it
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + (eps * 1e-3 if eps else 0)]
        r = int(ties[np.argmin(basis[ties])])
        streak = streak + 1 if not T[r, -1] > eps else 0
        _pivot_numpy(T, r, c, eps)
        basis[r] = c
    return ITER_LIMIT, max_iter


def _pivot_numpy(T, r, c, eps):
    T[r] = T[r] / T[r, c]
    f = T[:, c].copy()
    f[r] = 0
    T -= np.multiply.outer(f, T[r])
    if T.dtype != object:
        T[np.abs(T) < eps * 1e-4] = 0.0


@njit
def _simplex_numba(T, basis, eps, max_iter, bland_after):
    m = T.shape[0] - 1
    ncol = T.shape[1] - 1
    streak = 0
    for it in range(max_iter):
        c = -1
        if streak >= bland_after:
            for j in range(ncol):
                if T[m, j] < -eps:
                    c = j
                    break
        else:
            best = -eps
            for j in range(ncol):
                if T[m, j] < best:
                    best = T[m, j]
                    c = j
        if c < 0:
            return OPTIMAL, it
        r = -1
        best_ratio = np.inf
        for i in range(m):
            if T[i, c] > eps:
                ratio = T[i, ncol] / T[i, c]
                if ratio < best_ratio - eps * 1e-3:
                    best_ratio = ratio
                    r = i
                elif ratio <= best_ratio + eps * 1e-3 and basis[i] < basis[r]:
                    r = i
                    if ratio < best_ratio:
                        best_ratio = ratio
        if r < 0:
            return UNBOUNDED, it
        if T[r, ncol] > eps:
            streak = 0
        else:
            streak += 1
        piv = T[r, c]
        for j in range(ncol + 1):
            T[r, j] /= piv
        for i in range(m + 1):
            if i == r:
                continue
            f = T[i, c]
            if f != 0.0:
                for j in range(ncol + 1):
                    v = T[i, j] - f * T[r, j]
                    if abs(v) < eps * 1e-4:
                        v = 0.0
                    T[i, j] = v
        basis[r] = c
    return ITER_LIMIT, max_iter


def simplex(T, basis, eps, max_iter=50000, bland_after=50):
    """Run the simplex loop in place on ``T``; dispatches float tableaux to numba."""
    if _accel.USE_NUMBA and T.dtype == np.float64:
        status, it = _simplex_numba(T, basis, float(eps), int(max_iter), int(bland_after))
        return int(status), int(it)
    return _simplex_numpy(T, basis, eps, max_iter, bland_after)


def pivot(T, r, c, eps):
    _pivot_numpy(T, r, c, eps)


# ---------------------------------------------------------------------------
# discrete table enumeration
# ---------------------------------------------------------------------------

@njit
def _enumerate_numba(start, stop, n, m, W, S, own, opp_w, lines, bic_ok, dsic_ok, wel, rev):
    P = own.shape[0]
    base = n + 1
    digits = np.zeros(P, dtype=np.int64)
    X = np.zeros((n, m), dtype=W.dtype)
    n_lines = lines.shape[1]
    for t in range(start, stop):
        idx = t
        for p in range(P):
            digits[p] = idx % base
            idx //= base
        X[:, :] = 0
        for p in range(P):
            w = digits[p]
            if w > 0:
                X[w - 1, own[p, w - 1]] += opp_w[p, w - 1]
        mono = True
        for i in range(n):
            for k in range(1, m):
                if X[i, k] < X[i, k - 1]:
                    mono = False
        ds = True
        for i in range(n):
            for line in range(n_lines):
                prev = False
                for k in range(m):
                    win = digits[lines[i, line, k]] == i + 1
                    if prev and not win:
                        ds = False
                    prev = win
        k_out = t - start
        bic_ok[k_out] = mono
        dsic_ok[k_out] = ds
        zero = X[0, 0] * 0
        we = zero
        re = zero
        for i in range(n):
            pay = zero
            for k in range(m):
                if k == 0:
                    pay += S[k] * X[i, k]
                else:
                    pay += S[k] * (X[i, k] - X[i, k - 1])
                we += W[k] * S[k] * X[i, k]
                re += W[k] * pay
        wel[k_out] = we
        rev[k_out] = re


def _enumerate_numpy(start, stop, n, m, W, S, own, opp_w, lines, bic_ok, dsic_ok, wel, rev):
    P = own.shape[0]
    base = n + 1
    idx = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((idx.size, P), dtype=np.int64)
    rem = idx.copy()
    for p in range(P):
        digits[:, p] = rem % base
        rem //= base
    dtype = W.dtype
    X = np.zeros((idx.size, n, m), dtype=dtype)
    for i in range(n):
        onehot = np.zeros((P, m), dtype=dtype)
        onehot[np.arange(P), own[:, i]] = 1
        weights = (digits == i + 1).astype(dtype) * opp_w[:, i][None, :]
        X[:, i, :] = weights @ onehot
    bic_ok[:] = np.all(np.diff(X, axis=2) >= 0, axis=(1, 2))
    ds = np.ones(idx.size, dtype=bool)
    for i in range(n):
        win = digits[:, lines[i]] == i + 1  # (T, lines, m)
        ds &= ~np.any(win[:, :, :-1] & ~win[:, :, 1:], axis=(1, 2))
    dsic_ok[:] = ds
    dX = np.diff(X, axis=2, prepend=np.zeros((idx.size, n, 1), dtype=dtype))
    pay = np.cumsum(dX * S[None, None, :], axis=2)
    wel[:] = np.sum(X * (W * S)[None, None, :], axis=(1, 2))
    rev[:] = np.sum(pay * W[None, None, :], axis=(1, 2))


def enumerate_tables(start, stop, n, m, W, S, own, opp_w, lines):
    """Classify and score the allocation tables with indices in ``[start, stop)``.

    ``W`` and ``S`` are the (scaled) probability and value vectors, int64 for
    exact arithmetic or float64. Returns ``(bic_ok, dsic_ok, wel, rev)``.
    """
    size = stop - start
    bic_ok = np.zeros(size, dtype=np.bool_)
    dsic_ok = np.zeros(size, dtype=np.bool_)
    wel = np.zeros(size, dtype=W.dtype)
    rev = np.zeros(size, dtype=W.dtype)
    fn = _enumerate_numba if _accel.USE_NUMBA else _enumerate_numpy
    fn(start, stop, n, m, W, S, own, opp_w, lines, bic_ok, dsic_ok, wel, rev)
    return bic_ok, dsic_ok, wel, rev


# ---------------------------------------------------------------------------
# lower envelope of a family of lines
# ---------------------------------------------------------------------------

@njit
def _lower_envelope_numba(x, intercept, slope):
    out = np.empty(x.shape[0])
    arg = np.empty(x.shape[0], dtype=np.int64)
    for g in range(x.shape[0]):
        best = np.inf
        bi = -1
        for L in range(intercept.shape[0]):
            val = intercept[L] + slope[L] * x[g]
            if val < best:
                best = val
                bi = L
        out[g] = best
        arg[g] = bi
    return out, arg


def _lower_envelope_numpy(x, intercept, slope, chunk=256):
    out = np.empty(x.shape[0])
    arg = np.empty(x.shape[0], dtype=np.int64)
    for s in range(0, x.shape[0], chunk):
        vals = intercept[None, :] + slope[None, :] * x[s:s + chunk, None]
        arg[s:s + chunk] = np.argmin(vals, axis=1)
        out[s:s + chunk] = vals[np.arange(vals.shape[0]), arg[s:s + chunk]]
    return out, arg


def lower_envelope(x, intercept, slope):
    """``min_L intercept[L] + slope[L] * x`` at every ``x`` (and the argmin)."""
    x = np.ascontiguousarray(x, dtype=float)
    intercept = np.ascontiguousarray(intercept, dtype=float)
    slope = np.ascontiguousarray(slope, dtype=float)
    if _accel.USE_NUMBA:
        return _lower_envelope_numba(x, intercept, slope)
    return _lower_envelope_numpy(x, intercept, slope)


# ---------------------------------------------------------------------------
# Monte-Carlo tallies
# ---------------------------------------------------------------------------

@njit
def _tally_numba(Q, winners, n_bins, counts, wins):
    S, n = Q.shape
    for s in range(S):
        w = winners[s]
        for i in range(n):
            b = int(Q[s, i] * n_bins)
            if b >= n_bins:
                b = n_bins - 1
            counts[i, b] += 1
            if w == i + 1:
                wins[i, b] += 1


def _tally_numpy(Q, winners, n_bins, counts, wins):
    S, n = Q.shape
    bins = np.minimum((Q * n_bins).astype(np.int64), n_bins - 1)
    for i in range(n):
        counts[i] += np.bincount(bins[:, i], minlength=n_bins)
        wins[i] += np.bincount(bins[winners == i + 1, i], minlength=n_bins)


def tally(Q, winners, n_bins):
    """Per-buyer, per-quantile-bin sample counts and win counts."""
    n = Q.shape[1]
    counts = np.zeros((n, n_bins), dtype=np.int64)
    wins = np.zeros((n, n_bins), dtype=np.int64)
    Q = np.ascontiguousarray(Q, dtype=float)
    winners = np.ascontiguousarray(winners, dtype=np.int64)
    if _accel.USE_NUMBA:
        _tally_numba(Q, winners, n_bins, counts, wins)
    else:
        _tally_numpy(Q, winners, n_bins, counts, wins)
    return counts, wins
