"""Symmetric piecewise auctions, their deterministic implementations, and the
fixed-welfare revenue band.

A piecewise auction is described by its tail function ``P(q) = int_q^1 x``.
Family 1 is flat, then slope ``-k``, then Border-tight; family 2 is flat,
then Border-tight, then a linear tail with slope ``-kappa(r2)``.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, InternalError, InvalidInputError
from .lp import LpProblem, solve
from .priors import QuantileModel, check_condition1
from .reduced_form import InterimCurve, rev_wel_from_curve, uniform_grid

PARAM_TOL = 1e-10
MAX_BISECT = 200
JUMP_EPS = 1e-12
K_TOL = 1e-12


def kappa(r2: float, n: int) -> float:
    """``(1 - r2^n) / (n (1 - r2))`` written as a sum so that ``r2 -> 1`` is smooth."""
    return sum(r2 ** i for i in range(n)) / n


def k_max(r1: float, r2: float, n: int) -> float:
    """``(r2^n - r1^n) / (n (r2 - r1))``, the mean of ``q^(n-1)`` on ``[r1, r2]``."""
    return sum(r2 ** (n - 1 - i) * r1 ** i for i in range(n)) / n


@dataclass(frozen=True)
class PiecewiseAuction:
    family: int
    r1: float
    r2: float
    k: float = 0.0
    n: int = 2

    def __post_init__(self):
        if self.family not in (1, 2):
            raise InvalidInputError(f"family must be 1 or 2, got {self.family!r}")
        if self.n < 1:
            raise InvalidInputError("n must be positive")
        if not 0.0 <= self.r1 < self.r2 <= 1.0:
            raise InvalidInputError(f"need 0 <= r1 < r2 <= 1, got r1={self.r1}, r2={self.r2}")
        if self.family == 1:
            km = k_max(self.r1, self.r2, self.n)
            if not -K_TOL <= self.k <= km + K_TOL:
                raise InvalidInputError(f"k={self.k} outside [0, {km}]")
            object.__setattr__(self, "k", float(min(max(self.k, 0.0), km)))
        else:
            object.__setattr__(self, "k", 0.0)
        object.__setattr__(self, "r1", float(self.r1))
        object.__setattr__(self, "r2", float(self.r2))

    @property
    def kappa(self) -> float:
        return kappa(self.r2, self.n)

    @property
    def k_max(self) -> float:
        return k_max(self.r1, self.r2, self.n)

    def xhat(self, q):
        q = np.asarray(q, dtype=float)
        n, r1, r2 = self.n, self.r1, self.r2
        top = q ** (n - 1)
        if self.family == 1:
            return np.where(q <= r1, 0.0, np.where(q <= r2, self.k, top))
        return np.where(q <= r1, 0.0, np.where(q <= r2, top, self.kappa))

    def tail(self, q):
        """``P(q) = int_q^1 xhat`` in closed form."""
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        n, r1, r2 = self.n, self.r1, self.r2
        if self.family == 1:
            base = (1.0 - r2 ** n) / n
            mid = base + self.k * (r2 - q)
            low = base + self.k * (r2 - r1)
            return np.where(q >= r2, (1.0 - q ** n) / n, np.where(q >= r1, mid, low))
        kap = self.kappa
        tail_mass = kap * (1.0 - r2)
        mid = tail_mass + (r2 ** n - q ** n) / n
        low = tail_mass + (r2 ** n - r1 ** n) / n
        return np.where(q >= r2, kap * (1.0 - q), np.where(q >= r1, mid, low))

    def to_dict(self):
        d = {"family": self.family, "r1": self.r1, "r2": self.r2, "n": self.n}
        if self.family == 1:
            d["k"] = self.k
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(int(d["family"]), float(d["r1"]), float(d["r2"]),
                       float(d.get("k", 0.0)), int(d.get("n", 2)))
        except KeyError as e:
            raise InvalidInputError(f"piecewise auction config missing field {e.args[0]!r}")


def reserve_auction(rho: float, n: int) -> PiecewiseAuction:
    """``1{q > rho} q^(n-1)`` as a family-2 auction with ``r2 = 1``."""
    return PiecewiseAuction(2, rho, 1.0, 0.0, n)


def breakpoint_grid(pa: PiecewiseAuction, grid=None, N: int = 2048, eps: float = JUMP_EPS) -> np.ndarray:
    """``grid`` plus each interior breakpoint ``r`` and ``r + eps`` so jumps integrate cleanly."""
    g = uniform_grid(N) if grid is None else np.asarray(grid, dtype=float)
    extra = []
    for r in (pa.r1, pa.r2):
        if 0.0 <= r < 1.0:
            extra += [r, min(r + eps, 1.0)]
    return np.unique(np.concatenate([g, extra]))


def piecewise_interim(pa: PiecewiseAuction, grid=None, N: int = 2048) -> InterimCurve:
    g = breakpoint_grid(pa, grid, N)
    return InterimCurve(g, pa.xhat(g))


def piecewise_rev_wel(model: QuantileModel, pa: PiecewiseAuction, N: int = 2048) -> tuple:
    """``(REV, WEL)`` of the symmetric auction by quadrature on its own curve."""
    return rev_wel_from_curve(model, piecewise_interim(pa, N=N), n=pa.n)


# ---------------------------------------------------------------------------
# exact welfare / revenue by adaptive quadrature per segment
# ---------------------------------------------------------------------------

def _quad(f, a, b):
    if b <= a:
        return 0.0
    val, _ = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def _segments(pa: PiecewiseAuction):
    """``(a, b, kind, level)``: kind "const" has x = level, kind "top" has x = q^(n-1)."""
    if pa.family == 1:
        return [(pa.r1, pa.r2, "const", pa.k), (pa.r2, 1.0, "top", None)]
    return [(pa.r1, pa.r2, "top", None), (pa.r2, 1.0, "const", pa.kappa)]


def _functional(model: QuantileModel, pa: PiecewiseAuction, fn) -> float:
    n = pa.n
    total = 0.0
    for a, b, kind, level in _segments(pa):
        if b <= a or (kind == "const" and level == 0.0):
            continue
        if not model.bounded:
            b = min(b, 1.0 - 1e-15)
        if kind == "const":
            total += level * _quad(lambda q: fn(q), a, b)
        else:
            total += _quad(lambda q: fn(q) * q ** (n - 1), a, b)
    return n * total


def _uniform_moment(a, b, p):
    return (b ** (p + 1) - a ** (p + 1)) / (p + 1)


def welfare(model: QuantileModel, pa: PiecewiseAuction) -> float:
    """``n int v xhat`` (closed form for the uniform model, quadrature otherwise)."""
    if model.family == "uniform":
        n, total = pa.n, 0.0
        for a, b, kind, level in _segments(pa):
            total += level * _uniform_moment(a, b, 1) if kind == "const" else _uniform_moment(a, b, n)
        return n * total
    return _functional(model, pa, lambda q: float(model.value(q)))


def revenue(model: QuantileModel, pa: PiecewiseAuction) -> float:
    """``n int phi xhat`` (closed form for the uniform model, quadrature otherwise)."""
    if model.family == "uniform":
        n, total = pa.n, 0.0
        for a, b, kind, level in _segments(pa):
            if kind == "const":
                total += level * (2 * _uniform_moment(a, b, 1) - _uniform_moment(a, b, 0))
            else:
                total += 2 * _uniform_moment(a, b, n) - _uniform_moment(a, b, n - 1)
        return n * total
    return _functional(model, pa, lambda q: float(model.virtual(q)))


# ---------------------------------------------------------------------------
# deterministic DSIC implementation
# ---------------------------------------------------------------------------

@dataclass
class DeterministicRule:
    """Ex-post winner rule whose total interim allocation is ``n xhat``.

    Call it on an ``(S, n)`` array of quantiles to get winner codes
    (0 = seller, ``i`` = buyer ``i``).
    """

    pa: PiecewiseAuction
    lam: float
    case: str   # "fam2", "fam1-high" or "fam1-low"

    def __call__(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        pa = self.pa
        S, n = Q.shape
        if n != pa.n:
            raise InvalidInputError(f"rule built for {pa.n} buyers, got profiles with {n}")
        r1, r2, lam = pa.r1, pa.r2, self.lam
        A = Q > r2
        B = (Q >= r1) & (Q <= r2)
        anyA = A.any(axis=1)
        anyB = B.any(axis=1)
        first = lambda M: np.argmax(M, axis=1)
        out = np.zeros(S, dtype=np.int64)
        if self.case == "fam2":
            a_win = first(A) + 1
            b_win = np.argmax(np.where(B, Q, -1.0), axis=1) + 1
            out = np.where(anyA, a_win, np.where(anyB, b_win, 0))
            return out.astype(np.int64)
        a_win = np.argmax(np.where(A, Q, -1.0), axis=1) + 1
        if self.case == "fam1-high":
            j = first(B) + 1
            mid = np.where(B[:, 0], 1, np.where(Q[:, 0] <= lam * r1, j, 0))
        else:
            mid = np.where(B[:, 0] & (Q[:, 1] <= lam * r2), 1, 0)
        out = np.where(anyA, a_win, np.where(anyB, mid, 0))
        return out.astype(np.int64)

    def closed_form_interim(self, q, buyer: int):
        """Per-buyer interim allocation from the construction's probability formulas."""
        q = np.asarray(q, dtype=float)
        pa, lam = self.pa, self.lam
        n, r1, r2, i = pa.n, pa.r1, pa.r2, buyer
        below = q < r1
        above = q > r2
        if self.case == "fam2":
            mid_val = q ** (n - 1)
            top = r2 ** (i - 1)
        else:
            top = q ** (n - 1)
            if self.case == "fam1-high":
                mid_val = r2 ** (n - 1) if i == 1 else lam * r1 ** (i - 1) * r2 ** (n - i)
            else:
                mid_val = lam * r2 ** (n - 1) if i == 1 else 0.0
        return np.where(below, 0.0, np.where(above, top, mid_val))

    def _cells(self, q):
        pa = self.pa
        cuts = {0.0, 1.0, pa.r1, pa.r2, self.lam * pa.r1, self.lam * pa.r2, float(q)}
        return np.array(sorted(c for c in cuts if 0.0 <= c <= 1.0))

    def integrated_interim(self, q, buyer: int):
        """Interim allocation obtained by integrating the rule over opponent cells.

        Each opponent coordinate is cut at every threshold the rule compares
        against (and at ``q``); the rule is constant on each product cell, so
        evaluating it at cell midpoints and weighting by cell volume is exact.
        """
        n = self.pa.n
        out = []
        for qv in np.atleast_1d(np.asarray(q, dtype=float)):
            cuts = self._cells(qv)
            mids = 0.5 * (cuts[1:] + cuts[:-1])
            widths = np.diff(cuts)
            keep = widths > 0
            mids, widths = mids[keep], widths[keep]
            combos = np.array(list(itertools.product(range(mids.size), repeat=n - 1)), dtype=int)
            if n == 1:
                combos = np.zeros((1, 0), dtype=int)
            S = combos.shape[0]
            Q = np.empty((S, n))
            opp = [j for j in range(n) if j != buyer - 1]
            for col, j in enumerate(opp):
                Q[:, j] = mids[combos[:, col]]
            Q[:, buyer - 1] = qv
            w = np.prod(widths[combos], axis=1) if n > 1 else np.ones(1)
            out.append(float(np.sum(w[self(Q) == buyer])))
        return np.array(out) if np.ndim(q) else out[0]

    def total_interim(self, q, integrated: bool = True):
        fn = self.integrated_interim if integrated else self.closed_form_interim
        return sum(np.asarray(fn(q, i + 1), dtype=float) for i in range(self.pa.n))

    def to_dict(self):
        return {"auction": self.pa.to_dict(), "lambda": self.lam, "case": self.case}


def deterministic_implement(pa: PiecewiseAuction) -> DeterministicRule:
    """Deterministic DSIC rule matching ``n xhat(q)`` in total interim allocation."""
    n = pa.n
    if pa.family == 2:
        return DeterministicRule(pa, 0.0, "fam2")
    if n < 2:
        raise InvalidInputError("family-1 implementation needs n >= 2")
    r1, r2, k = pa.r1, pa.r2, pa.k
    top = r2 ** (n - 1)
    if k >= top / n:
        denom = sum(r1 ** (i - 1) * r2 ** (n - i) for i in range(2, n + 1))
        if denom == 0.0:
            if abs(n * k - top) > 1e-9:
                raise InternalError("r1 = 0 forces k = r2^(n-1)/n")
            lam = 0.0
        else:
            lam = (n * k - top) / denom
        case = "fam1-high"
    else:
        lam = n * k / top
        case = "fam1-low"
    if not -1e-9 <= lam <= 1 + 1e-9:
        raise InternalError(f"lambda={lam} outside [0, 1] for {pa}")
    return DeterministicRule(pa, float(min(max(lam, 0.0), 1.0)), case)


# ---------------------------------------------------------------------------
# discretized boundary problem
# ---------------------------------------------------------------------------

@dataclass
class Objective2Solution:
    status: str
    grid: np.ndarray
    P: np.ndarray | None
    objective: float | None
    c: float
    c_requested: float
    sense: str

    @property
    def optimal(self):
        return self.status == "optimal"


SNAP_TOL = 1e-4


def _trap_weights(q):
    w = np.zeros_like(q)
    d = np.diff(q)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def objective2_solve(model: QuantileModel, n: int, c: float, sense: str = "max",
                     gridN: int = 200, tie_break: bool = True) -> Objective2Solution:
    """Max or min ``n phi(0) P(0) + n int phi' P`` at welfare ``n int v' P = c``.

    Discretized on ``gridN + 1`` uniform knots with trapezoid weights; ``P``
    is bounded by the Border curve, nonincreasing, concave, and ``P(1) = 0``.
    Because the trapezoid welfare of the Border curve sits slightly below
    its continuous value, a ``c`` within ``SNAP_TOL`` above the discrete
    maximum is moved onto it. Degenerate optima are resolved by a second
    program that fixes revenue and extremises ``sum q P`` (stochastic order),
    which lands on a piecewise vertex.
    """
    if sense not in ("max", "min"):
        raise InvalidInputError(f"sense must be 'max' or 'min', got {sense!r}")
    if not model.bounded:
        raise DomainError("the boundary program needs a bounded value function on [0, 1]")
    if gridN < 8:
        raise InvalidInputError("gridN must be at least 8")
    q = np.linspace(0.0, 1.0, gridN + 1)
    w = _trap_weights(q)
    a = n * model.dvalue(q) * w
    r = n * model.dvirtual(q) * w
    r[0] += n * float(model.virtual(0.0))
    ub = (1.0 - q ** n) / n
    c_req = float(c)
    wmax = float(a @ ub)
    if c_req > wmax:
        if c_req - wmax <= SNAP_TOL * (1.0 + abs(c_req)):
            c = wmax
        else:
            return Objective2Solution("infeasible", q, None, None, c_req, c_req, sense)
    if c < 0:
        return Objective2Solution("infeasible", q, None, None, c_req, c_req, sense)
    N = gridN + 1
    cons = [(a.tolist(), "=", c)]
    for j in range(N - 1):
        row = [0.0] * N
        row[j], row[j + 1] = -1.0, 1.0
        cons.append((row, "<=", 0.0))
    for j in range(1, N - 1):
        row = [0.0] * N
        row[j - 1], row[j], row[j + 1] = 1.0, -2.0, 1.0
        cons.append((row, "<=", 0.0))
    bounds = [(0.0, float(u)) for u in ub]
    bounds[-1] = (0.0, 0.0)
    sol = solve(LpProblem(r.tolist(), sense, cons, bounds), "float")
    if not sol.optimal:
        return Objective2Solution(sol.status, q, None, None, c, c_req, sense)
    P = np.array(sol.values, dtype=float)
    best = float(r @ P)
    if tie_break:
        slack = 1e-9 * (1.0 + abs(best))
        extra = (r.tolist(), ">=", best - slack) if sense == "max" else (r.tolist(), "<=", best + slack)
        tb_sense = "min" if sense == "max" else "max"
        sol2 = solve(LpProblem(q.tolist(), tb_sense, cons + [extra], bounds), "float")
        if sol2.optimal:
            P = np.array(sol2.values, dtype=float)
    P = np.clip(P, 0.0, ub)
    return Objective2Solution("optimal", q, P, float(r @ P), c, c_req, sense)


# ---------------------------------------------------------------------------
# fitting a piecewise auction to a tail function
# ---------------------------------------------------------------------------

@dataclass
class PiecewiseFit:
    pa: PiecewiseAuction
    sup_error: float
    rms_error: float


def _tail_params(family, r1, u, s, n, q):
    r2 = r1 + (1.0 - r1) * u
    if family == 1:
        k = s * k_max(r1, r2, n)
        base = (1.0 - r2 ** n) / n
        return np.where(q >= r2, (1.0 - q ** n) / n,
                        np.where(q >= r1, base + k * (r2 - q), base + k * (r2 - r1)))
    kap = kappa(r2, n)
    tm = kap * (1.0 - r2)
    return np.where(q >= r2, kap * (1.0 - q),
                    np.where(q >= r1, tm + (r2 ** n - q ** n) / n, tm + (r2 ** n - r1 ** n) / n))


def _make(family, r1, u, s, n):
    r1 = float(np.clip(r1, 0.0, 1.0 - 1e-12))
    u = float(np.clip(u, 1e-12, 1.0))
    r2 = min(1.0, r1 + (1.0 - r1) * u)
    if r2 <= r1:
        r2 = min(1.0, r1 + 1e-12)
    k = float(np.clip(s, 0.0, 1.0)) * k_max(r1, r2, n) if family == 1 else 0.0
    return PiecewiseAuction(family, r1, r2, k, n)


def fit_piecewise(P, n: int, grid=None) -> PiecewiseFit:
    """Least-squares fit of both families to ``P`` (coarse grid, then local refinement)."""
    P = np.asarray(P, dtype=float)
    q = np.linspace(0.0, 1.0, P.size) if grid is None else np.asarray(grid, dtype=float)
    if q.shape != P.shape:
        raise InvalidInputError("P and grid differ in length")
    r1s = np.linspace(0.0, 0.98, 50)
    us = np.linspace(0.02, 1.0, 50)
    ss = np.linspace(0.0, 1.0, 11)
    best = []
    for family in (2, 1):
        cand = []
        for s in (ss if family == 1 else [0.0]):
            R1, U = np.meshgrid(r1s, us, indexing="ij")
            R1, U = R1.ravel(), U.ravel()
            fits = _tail_params(family, R1[:, None], U[:, None], s, n, q[None, :])
            err = np.sqrt(np.mean((fits - P[None, :]) ** 2, axis=1))
            for j in np.argsort(err)[:3]:
                cand.append((err[j], R1[j], U[j], s))
        cand.sort(key=lambda t: t[0])
        for _, r1, u, s in cand[:4]:
            if family == 1:
                x0, lo, hi = [r1, u, s], [0.0, 1e-9, 0.0], [1.0 - 1e-9, 1.0, 1.0]
                res_fn = lambda x: _tail_params(1, x[0], x[1], x[2], n, q) - P
            else:
                x0, lo, hi = [r1, u], [0.0, 1e-9], [1.0 - 1e-9, 1.0]
                res_fn = lambda x: _tail_params(2, x[0], x[1], 0.0, n, q) - P
            x0 = np.clip(x0, lo, hi)
            res = optimize.least_squares(res_fn, x0, bounds=(lo, hi), xtol=1e-14, ftol=1e-14, gtol=1e-14)
            x = res.x
            pa = _make(family, x[0], x[1], x[2] if family == 1 else 0.0, n)
            diff = pa.tail(q) - P
            best.append(PiecewiseFit(pa, float(np.max(np.abs(diff))), float(np.sqrt(np.mean(diff ** 2)))))
    # the degenerate endpoints are exact candidates so they are not approximated
    # by near-degenerate parameters
    for pa in (PiecewiseAuction(1, 0.0, 1.0, 0.0, n), PiecewiseAuction(2, 0.0, 1.0, 0.0, n)):
        diff = pa.tail(q) - P
        best.insert(0, PiecewiseFit(pa, float(np.max(np.abs(diff))), float(np.sqrt(np.mean(diff ** 2)))))
    # family 2 wins ties; a stable sort keeps the exact candidates first
    best.sort(key=lambda f: (round(f.sup_error, 10), -f.pa.family))
    return best[0]


# ---------------------------------------------------------------------------
# constant-welfare transfer paths
# ---------------------------------------------------------------------------

def _bisect(f, lo, hi, tol=PARAM_TOL, max_iter=MAX_BISECT):
    """Root of a monotone ``f`` on ``[lo, hi]``; requires a sign change."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise InternalError(f"bisection bracket [{lo}, {hi}] does not straddle a root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0 or hi - lo < tol * 1e-4:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def reserve_welfare(model: QuantileModel, rho: float, n: int) -> float:
    """``W(rho) = n int_rho^1 v q^(n-1)``."""
    if rho >= 1.0:
        return 0.0
    return welfare(model, reserve_auction(rho, n))


def canonical_reserve(model: QuantileModel, c: float, n: int) -> float:
    """``rho*`` with ``W(rho*) = c`` (``W`` is decreasing)."""
    top = reserve_welfare(model, 0.0, n)
    if c > top + 1e-12 or c < 0:
        raise InvalidInputError(f"welfare {c} outside [0, {top}]")
    if c >= top:
        return 0.0
    if c <= 0:
        return 1.0
    return _bisect(lambda r: reserve_welfare(model, r, n) - c, 0.0, 1.0)


@dataclass
class TransferPath:
    steps: list
    c: float
    rho_star: float
    leg_a: list = field(default_factory=list)
    leg_b: list = field(default_factory=list)
    welfare: list = field(default_factory=list)

    @property
    def max_welfare_dev(self) -> float:
        return max(abs(w - self.c) for w in self.welfare) if self.welfare else 0.0

    def max_jump(self, grid=None) -> float:
        """Largest sup-norm change of ``P`` between consecutive steps."""
        q = np.linspace(0, 1, 513) if grid is None else grid
        tails = [s.tail(q) for s in self.steps]
        return max((float(np.max(np.abs(b - a))) for a, b in zip(tails, tails[1:])), default=0.0)

    def to_dict(self):
        return {"c": self.c, "rho_star": self.rho_star,
                "steps": [s.to_dict() for s in self.steps], "welfare": self.welfare}


def _leg_to_canonical(model, pa: PiecewiseAuction, c: float, rho: float, steps: int) -> list:
    n = pa.n
    ts = np.linspace(0.0, 1.0, steps + 1)
    path = [pa]
    if pa.family == 2:
        switch_at = None
        for t in ts[1:]:
            r2t = (1.0 - t) * pa.r2 + t
            lo_w = welfare(model, PiecewiseAuction(1, r2t, 1.0, kappa(r2t, n), n)) if r2t < 1 else 0.0
            if c < lo_w - 1e-15:
                switch_at = t
                break
            f = lambda r1: welfare(model, _fam2_safe(r1, r2t, n)) - c
            hi = r2t * (1 - 1e-15) if r2t < 1 else 1.0 - 1e-15
            r1t = _bisect(f, 0.0, hi)
            path.append(PiecewiseAuction(2, min(r1t, np.nextafter(r2t, 0)), r2t, 0.0, n))
        if switch_at is None:
            path[-1] = reserve_auction(rho, n) if abs(path[-1].r1 - rho) < 1e-8 else path[-1]
            return path
        # the family-2 auction with r1 -> r2 is the family-1 auction (r2, 1, kappa);
        # keep going along the family-1 homotopy from there
        prev = path[-1]
        r_switch = _bisect(
            lambda r: welfare(model, PiecewiseAuction(1, r, 1.0, kappa(r, n), n)) - c,
            prev.r1, 1.0 - 1e-12)
        fam1 = PiecewiseAuction(1, r_switch, 1.0, min(kappa(r_switch, n), k_max(r_switch, 1.0, n)), n)
        rest = max(1, int(round(steps * (1.0 - switch_at))) + 1)
        return path + _leg_to_canonical(model, fam1, c, rho, rest)
    # family 1: slide r2 down to rho*, holding welfare with k(t)
    r1 = pa.r1
    if r1 >= rho - 1e-12:
        return [pa, reserve_auction(rho, n)]
    for t in ts[1:]:
        r2t = (1.0 - t) * pa.r2 + t * rho
        if t == 1.0:
            path.append(PiecewiseAuction(1, r1, rho, 0.0, n))
            break
        tw = reserve_welfare(model, r2t, n)
        mass = welfare(model, PiecewiseAuction(1, r1, r2t, k_max(r1, r2t, n), n)) - tw
        kt = 0.0 if mass <= 0 else (c - tw) / mass * k_max(r1, r2t, n)
        km = k_max(r1, r2t, n)
        if kt > km * (1 + 1e-9) + 1e-12 or kt < -1e-12:
            raise InternalError(f"k(t)={kt} leaves [0, {km}] at t={t}")
        path.append(PiecewiseAuction(1, r1, r2t, min(max(kt, 0.0), km), n))
    return path


def _fam2_safe(r1, r2, n):
    r1 = min(max(r1, 0.0), np.nextafter(r2, 0))
    return PiecewiseAuction(2, r1, r2, 0.0, n)


def transfer_path(model: QuantileModel, pa_a: PiecewiseAuction, pa_b: PiecewiseAuction,
                  steps: int = 50, tol: float = 1e-6) -> TransferPath:
    """Fixed-welfare path ``pa_a -> reserve(rho*) -> pa_b`` through piecewise auctions."""
    if pa_a.n != pa_b.n:
        raise InvalidInputError("endpoints must have the same number of buyers")
    wa, wb = welfare(model, pa_a), welfare(model, pa_b)
    c = wa
    if abs(wa - wb) > tol * (1 + abs(c)):
        raise InvalidInputError(f"endpoint welfare differs: {wa} vs {wb}")
    rho = canonical_reserve(model, c, pa_a.n)
    if pa_a == pa_b:
        steps_list = [pa_a] * (steps + 1)
        return TransferPath(steps_list, c, rho, steps_list, steps_list, [wa] * len(steps_list))
    leg_a = _leg_to_canonical(model, pa_a, c, rho, steps)
    leg_b = _leg_to_canonical(model, pa_b, c, rho, steps)
    full = leg_a + [reserve_auction(rho, pa_a.n)] + leg_b[::-1]
    wel = [welfare(model, s) for s in full]
    return TransferPath(full, c, rho, leg_a, leg_b, wel)


# ---------------------------------------------------------------------------
# fixed-welfare revenue band
# ---------------------------------------------------------------------------

@dataclass
class RegionRow:
    c: float
    rev_min: float | None
    rev_max: float | None
    fit_min: PiecewiseFit | None = None
    fit_max: PiecewiseFit | None = None
    rule_min: DeterministicRule | None = None
    rule_max: DeterministicRule | None = None
    status: str = "optimal"


def _implement_or_none(fit):
    try:
        return deterministic_implement(fit.pa)
    except (InvalidInputError, InternalError):
        return None


def pair_region(model: QuantileModel, n: int, welfare_grid: Sequence[float], gridN: int = 200,
                threads: int | None = 1) -> list:
    """Revenue band ``[R_min(c), R_max(c)]`` for each welfare level with piecewise witnesses."""
    rep = check_condition1(model, 64)
    if not rep.holds:
        warnings.warn(f"model fails the v'' >= 0, phi'' <= 0 condition near q={rep.worst_q:.4g}; "
                      "band endpoints need not be piecewise", RuntimeWarning, stacklevel=2)

    def one(c):
        lo = objective2_solve(model, n, c, "min", gridN)
        hi = objective2_solve(model, n, c, "max", gridN)
        if not (lo.optimal and hi.optimal):
            return RegionRow(float(c), None, None, status=lo.status if not lo.optimal else hi.status)
        fmin, fmax = fit_piecewise(lo.P, n, lo.grid), fit_piecewise(hi.P, n, hi.grid)
        return RegionRow(float(c), lo.objective, hi.objective, fmin, fmax,
                         _implement_or_none(fmin), _implement_or_none(fmax))

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, welfare_grid))
    return [one(c) for c in welfare_grid]
