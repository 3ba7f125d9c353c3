"""Deterministic allocation tables over a discrete i.i.d. prior.

Profiles ``(k_1, ..., k_n)`` (0-based type indices) are flattened row-major
with buyer 1 as the slowest digit. A table assigns each profile a winner in
``{0, 1, ..., n}`` (0 = the seller keeps the item) and is identified by the
base-``(n+1)`` integer ``sum_p winner[p] * (n+1)**p``.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InvalidInputError, ResourceError
from .lp import LpProblem, solve
from .priors import DiscretePrior

DEFAULT_CAP = 10**8
CHUNK = 1 << 18


@dataclass(frozen=True)
class AllocationTable:
    n: int
    m: int
    winner: tuple

    def __post_init__(self):
        if len(self.winner) != self.m ** self.n:
            raise InvalidInputError(f"table needs {self.m ** self.n} entries, got {len(self.winner)}")
        if any(not 0 <= w <= self.n for w in self.winner):
            raise InvalidInputError(f"winner entries must lie in 0..{self.n}")

    @classmethod
    def from_index(cls, index: int, n: int, m: int) -> "AllocationTable":
        size = m ** n
        if not 0 <= index < (n + 1) ** size:
            raise InvalidInputError(f"table index {index} out of range")
        out = []
        for _ in range(size):
            index, d = divmod(index, n + 1)
            out.append(d)
        return cls(n, m, tuple(out))

    @classmethod
    def from_function(cls, n: int, m: int, fn) -> "AllocationTable":
        """Build from ``fn(profile_tuple) -> winner`` over 0-based type indices."""
        return cls(n, m, tuple(int(fn(p)) for p in profiles(n, m)))

    @property
    def index(self) -> int:
        idx = 0
        for w in reversed(self.winner):
            idx = idx * (self.n + 1) + w
        return idx

    def at(self, profile) -> int:
        return self.winner[profile_index(profile, self.m)]

    def grid(self):
        """Nested lists ``grid[k_1][k_2]...`` of winners."""
        arr = np.array(self.winner, dtype=int).reshape((self.m,) * self.n)
        return arr.tolist()


def profiles(n: int, m: int):
    return itertools.product(range(m), repeat=n)


def profile_index(profile, m: int) -> int:
    p = 0
    for k in profile:
        p = p * m + k
    return p


def efficient_table(n: int, m: int) -> AllocationTable:
    """Highest type wins; ties go to the lowest buyer index."""
    return AllocationTable.from_function(n, m, lambda p: 1 + max(range(n), key=lambda i: (p[i], -i)))


def seller_keeps_table(n: int, m: int) -> AllocationTable:
    return AllocationTable(n, m, (0,) * m ** n)


def _check_dims(prior: DiscretePrior, table: AllocationTable):
    if prior.m != table.m:
        raise InvalidInputError(f"table has {table.m} types per buyer, prior has {prior.m}")


def interim_alloc_discrete(prior: DiscretePrior, table: AllocationTable, buyer: int) -> list:
    """``x_i(t^k)`` for buyer ``buyer`` (1-based), ascending in type."""
    _check_dims(prior, table)
    if not 1 <= buyer <= table.n:
        raise InvalidInputError(f"buyer must be in 1..{table.n}")
    i = buyer - 1
    x = [prior.zero()] * prior.m
    for prof in profiles(table.n, table.m):
        if table.at(prof) == buyer:
            w = prior.zero() + 1
            for j, k in enumerate(prof):
                if j != i:
                    w *= prior.probs[k]
            x[prof[i]] += w
    return x


def interim_all(prior: DiscretePrior, table: AllocationTable) -> list:
    return [interim_alloc_discrete(prior, table, i + 1) for i in range(table.n)]


def is_bic_alloc(interim) -> bool:
    """True iff each buyer's interim vector is nondecreasing.

    Accepts one vector or a list of per-buyer vectors.
    """
    vecs = interim
    if len(interim) and not isinstance(interim[0], (list, tuple, np.ndarray)):
        vecs = [interim]
    return all(b >= a for vec in vecs for a, b in zip(vec, vec[1:]))


def optimal_bic_payments(prior: DiscretePrior, interim: Sequence) -> list:
    """Revenue-maximal BIC and IR payments for one monotone interim vector.

    ``p(t^k) = sum_{j<=k} t^j (x(t^j) - x(t^{j-1}))`` with ``x(t^0) = 0``.
    """
    if len(interim) != prior.m:
        raise InvalidInputError(f"interim vector has length {len(interim)}, prior has {prior.m} types")
    if not is_bic_alloc(list(interim)):
        raise InvalidInputError("interim allocation is not monotone; no BIC payments exist")
    pay, prev, acc = [], prior.zero(), prior.zero()
    for t, x in zip(prior.values, interim):
        acc = acc + t * (x - prev)
        pay.append(acc)
        prev = x
    return pay


def bic_payment_lp(prior: DiscretePrior, interim: Sequence, sense: str = "max",
                   nonnegative: bool = False) -> LpProblem:
    """Explicit BIC + interim IR program over the payment vector ``p``."""
    t, pi, m = prior.values, prior.probs, prior.m
    cons = []
    for k in range(m):
        row = [0] * m
        row[k] = -1
        cons.append((row, ">=", -t[k] * interim[k]))
        for j in range(m):
            if j != k:
                row = [0] * m
                row[k], row[j] = -1, 1
                cons.append((row, ">=", t[k] * interim[j] - t[k] * interim[k]))
    bounds = [(0, None) if nonnegative else (None, None)] * m
    return LpProblem(list(pi), sense, cons, bounds)


def lp_bic_payments(prior: DiscretePrior, interim: Sequence, mode: str | None = None) -> list:
    """Payments from the LP oracle; ``mode`` defaults to the prior's arithmetic."""
    mode = mode or ("rational" if prior.exact else "float")
    sol = solve(bic_payment_lp(prior, interim), mode)
    if not sol.optimal:
        raise InvalidInputError(f"BIC payment program is {sol.status}")
    return sol.values


def payment_revenue_interval(prior: DiscretePrior, interims: Sequence) -> tuple:
    """(min, max) expected revenue over BIC + IR payments with ``p >= 0``."""
    mode = "rational" if prior.exact else "float"
    lo = hi = prior.zero()
    for x in interims:
        for sense in ("min", "max"):
            sol = solve(bic_payment_lp(prior, x, sense, nonnegative=True), mode)
            if not sol.optimal:
                raise InvalidInputError(f"BIC payment program is {sol.status}")
            if sense == "min":
                lo += sol.objective_value
            else:
                hi += sol.objective_value
    return lo, hi


def is_dsic(table: AllocationTable) -> bool:
    """Each buyer's win indicator is an up-set in own type for fixed opponents."""
    n, m = table.n, table.m
    for i in range(n):
        for opp in itertools.product(range(m), repeat=n - 1):
            won = False
            for k in range(m):
                prof = opp[:i] + (k,) + opp[i:]
                win = table.at(prof) == i + 1
                if won and not win:
                    return False
                won = win
    return True


def rev_wel(prior: DiscretePrior, interims: Sequence, payments: Sequence) -> tuple:
    """``(REV, WEL)`` summed over buyers."""
    rev = wel = prior.zero()
    for x, p in zip(interims, payments):
        for t, pk, xk, pyk in zip(prior.values, prior.probs, x, p):
            wel += pk * t * xk
            rev += pk * pyk
    return rev, wel


@dataclass
class DiscreteMechanism:
    table: AllocationTable
    interim_alloc: list
    payments: list | None
    rev: object
    wel: object
    bic: bool
    dsic: bool


def classify(prior: DiscretePrior, table: AllocationTable) -> DiscreteMechanism:
    x = interim_all(prior, table)
    bic = is_bic_alloc(x)
    pay, rev, wel = None, None, None
    if bic:
        pay = [optimal_bic_payments(prior, xi) for xi in x]
        rev, wel = rev_wel(prior, x, pay)
    else:
        wel = rev_wel(prior, x, [[0] * prior.m] * table.n)[1]
    return DiscreteMechanism(table, x, pay, rev, wel, bic, is_dsic(table))


# ---------------------------------------------------------------------------
# exhaustive enumeration
# ---------------------------------------------------------------------------

@dataclass
class ParetoPoint:
    wel: object
    rev: object
    witnesses: list = field(default_factory=list)


def _common_denominator(xs):
    d = 1
    for x in xs:
        d = d * x.denominator // math.gcd(d, x.denominator)
    return d


class _Setup:
    def __init__(self, prior: DiscretePrior, n: int):
        m = prior.m
        self.n, self.m = n, m
        self.P = m ** n
        prof = np.array(list(profiles(n, m)), dtype=np.int64).reshape(self.P, n)
        self.own = np.ascontiguousarray(prof)
        if prior.exact:
            D = _common_denominator(prior.probs)
            E = _common_denominator(prior.values)
            w = [int(p * D) for p in prior.probs]
            s = [int(v * E) for v in prior.values]
            self.scale = Fraction(1, D ** n * E)
            bound = n * m * max(s) * D ** n * 4
            dtype = np.int64 if bound < 2 ** 62 else object
        else:
            w, s = list(prior.probs), list(prior.values)
            self.scale = 1.0
            dtype = np.float64
        self.exact = prior.exact
        self.dtype = dtype
        self.W = np.array(w, dtype=dtype)
        self.S = np.array(s, dtype=dtype)
        opp = np.empty((self.P, n), dtype=dtype)
        for p in range(self.P):
            for i in range(n):
                acc = dtype(1) if dtype is not object else 1
                for j in range(n):
                    if j != i:
                        acc = acc * w[prof[p, j]]
                opp[p, i] = acc
        self.opp_w = opp
        n_lines = m ** (n - 1)
        lines = np.empty((n, n_lines, m), dtype=np.int64)
        for i in range(n):
            for L, o in enumerate(itertools.product(range(m), repeat=n - 1)):
                for k in range(m):
                    lines[i, L, k] = profile_index(o[:i] + (k,) + o[i:], m)
        self.lines = lines

    def run(self, start, stop):
        if self.dtype is object:
            size = stop - start
            out = (np.zeros(size, bool), np.zeros(size, bool),
                   np.zeros(size, object), np.zeros(size, object))
            kernels._enumerate_numpy(start, stop, self.n, self.m, self.W, self.S, self.own,
                                     self.opp_w, self.lines, *out)
            return out
        return kernels.enumerate_tables(start, stop, self.n, self.m, self.W, self.S,
                                        self.own, self.opp_w, self.lines)

    def to_money(self, raw):
        if self.exact:
            return Fraction(int(raw)) * self.scale
        return float(raw)


def _frontier(wel, rev, idx, exact):
    """Pareto-undominated (wel, rev) pairs (both maximised) with witnesses."""
    if wel.size == 0:
        return []
    if exact:
        kw, kr = wel, rev
    else:
        kw, kr = np.round(wel, 9), np.round(rev, 9)
    order = sorted(range(wel.size), key=lambda j: (-kw[j], -kr[j], idx[j]))
    points, best = [], None
    cur_key, cur = None, None
    for j in order:
        key = (kw[j], kr[j])
        if cur is not None and key == cur_key:
            cur[2].append(int(idx[j]))
            continue
        if best is None or kr[j] > best:
            cur_key = key
            cur = [wel[j], rev[j], [int(idx[j])]]
            points.append(cur)
            best = kr[j]
        else:
            cur_key, cur = None, None
    return points


def default_threads() -> int:
    env = os.environ.get("MECHLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def enumerate_pareto(prior: DiscretePrior, n: int, klass: str = "bic", cap: int = DEFAULT_CAP,
                     threads: int | None = 1, chunk: int = CHUNK) -> list:
    """Pareto frontier of (WEL, REV) over every deterministic table.

    ``klass`` is ``"bic"`` (monotone interim allocations) or ``"dsic"``
    (threshold form in own type). Each table is paired with its
    revenue-maximal BIC payments. Points come back sorted by decreasing
    welfare; witnesses are ascending table indices.
    """
    klass = klass.lower()
    if klass not in ("bic", "dsic"):
        raise InvalidInputError(f"class must be 'bic' or 'dsic', got {klass!r}")
    if n < 1:
        raise InvalidInputError("need at least one buyer")
    total = (n + 1) ** (prior.m ** n)
    if total > cap:
        raise ResourceError(f"enumeration needs {total} tables, cap is {cap}", required=total)
    setup = _Setup(prior, n)

    def work(bounds):
        s, e = bounds
        bic_ok, dsic_ok, wel, rev = setup.run(s, e)
        mask = bic_ok if klass == "bic" else dsic_ok
        sel = np.nonzero(mask)[0]
        return _frontier(wel[sel], rev[sel], sel + s, setup.exact)

    ranges = [(s, min(s + chunk, total)) for s in range(0, total, chunk)]
    threads = threads or default_threads()
    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, ranges))
    else:
        parts = [work(r) for r in ranges]

    merged = [pt for part in parts for pt in part]
    if not merged:
        return []
    dt = object if setup.exact else float
    wel = np.array([p[0] for p in merged], dtype=dt)
    rev = np.array([p[1] for p in merged], dtype=dt)
    front = _frontier(wel, rev, np.arange(len(merged)), setup.exact)
    out = []
    for w, r, ids in front:
        wit = sorted(i for j in ids for i in merged[j][2])
        out.append(ParetoPoint(setup.to_money(w), setup.to_money(r), wit))
    return out


def attainable_points(prior: DiscretePrior, n: int, klass: str = "bic", cap: int = 10**6) -> list:
    """Every distinct (WEL, REV) pair of the class, dominated ones included, sorted."""
    klass = klass.lower()
    if klass not in ("bic", "dsic"):
        raise InvalidInputError(f"class must be 'bic' or 'dsic', got {klass!r}")
    total = (n + 1) ** (prior.m ** n)
    if total > cap:
        raise ResourceError(f"listing needs {total} tables, cap is {cap}", required=total)
    setup = _Setup(prior, n)
    bic_ok, dsic_ok, wel, rev = setup.run(0, total)
    mask = bic_ok if klass == "bic" else dsic_ok
    pts = {(setup.to_money(w), setup.to_money(r)) for w, r in zip(wel[mask], rev[mask])}
    return sorted(pts)
