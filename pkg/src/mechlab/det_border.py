"""Deterministic implementability of interim allocations.

Two buyers: strictly increasing ``(x1, x2)`` is implementable by a
deterministic DSIC rule iff ``x2(x1(q)) <= q`` for all ``q`` (with equality
everywhere when the item is always sold). Three buyers with constant interim
allocations ``c_i``: implementable iff ``1 - sum c >= 2 sqrt(c1 c2 c3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError
from .priors import to_fraction
from .reduced_form import InterimCurve

MIN_SLOPE = 1e-6
TOL = 1e-9


@dataclass
class TwoBuyerReport:
    implementable: bool
    always_sold: bool
    worst_q: float
    margin: float

    def to_dict(self):
        return {"implementable": self.implementable, "always_sold": self.always_sold,
                "worst_q": self.worst_q, "margin": self.margin}


def _require_strict(curve: InterimCurve, name: str, delta: float):
    slopes = np.diff(curve.values) / np.diff(curve.grid)
    if slopes.min() < delta:
        j = int(np.argmin(slopes))
        raise InvalidInputError(
            f"{name} is not strictly increasing: slope {slopes[j]:.3g} < {delta:g} near q={curve.grid[j]:.6g}")


def _dense_grid(x1: InterimCurve, size: int) -> np.ndarray:
    return np.unique(np.concatenate([x1.grid, np.linspace(0.0, 1.0, size)]))


def check_two_buyer(x1: InterimCurve, x2: InterimCurve, always_sold: bool = False,
                    delta: float = MIN_SLOPE, tol: float = TOL, grid_size: int = 4097) -> TwoBuyerReport:
    """Evaluate ``x2(x1(q)) - q`` on a dense grid (piecewise-linear composition)."""
    _require_strict(x1, "x1", delta)
    _require_strict(x2, "x2", delta)
    q = _dense_grid(x1, grid_size)
    d = x2(x1(q)) - q
    if always_sold:
        j = int(np.argmax(np.abs(d)))
        margin = float(abs(d[j]))
        ok = margin <= tol
    else:
        j = int(np.argmax(d))
        margin = float(d[j])
        ok = margin <= tol
    return TwoBuyerReport(bool(ok), bool(always_sold), float(q[j]), margin)


@dataclass
class TwoBuyerRule:
    """Buyer 1 wins iff ``q2 <= x1(q1)``; otherwise buyer 2 wins iff ``q1 <= x2(q2)``."""

    x1: InterimCurve
    x2: InterimCurve

    def __call__(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != 2:
            raise InvalidInputError("two-buyer rule needs profiles with 2 columns")
        q1, q2 = Q[:, 0], Q[:, 1]
        one = q2 <= self.x1(q1)
        two = ~one & (q1 <= self.x2(q2))
        return np.where(one, 1, np.where(two, 2, 0)).astype(np.int64)

    def color_grid(self, N: int) -> "ColorGrid":
        return ColorGrid.from_rule(self, N)


def construct_two_buyer(x1: InterimCurve, x2: InterimCurve, **kw) -> TwoBuyerRule:
    rep = check_two_buyer(x1, x2, **kw)
    if not rep.implementable:
        raise InvalidInputError(
            f"x2(x1(q)) exceeds q by {rep.margin:.3g} at q={rep.worst_q:.6g}; no deterministic rule exists")
    return TwoBuyerRule(x1, x2)


# ---------------------------------------------------------------------------
# colorings of the unit square
# ---------------------------------------------------------------------------

@dataclass
class ColorGrid:
    """``colors[i1, i2]`` is the winner on the cell centred at ``((i1+.5)/N, (i2+.5)/N)``."""

    colors: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.colors)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InvalidInputError("color grid must be square")
        if c.size and (c.min() < 0 or c.max() > 2):
            raise InvalidInputError("colors must be 0, 1 or 2")
        self.colors = c.astype(np.int8)

    @property
    def N(self) -> int:
        return self.colors.shape[0]

    @classmethod
    def from_rule(cls, rule, N: int) -> "ColorGrid":
        centers = (np.arange(N) + 0.5) / N
        Q1, Q2 = np.meshgrid(centers, centers, indexing="ij")
        w = rule(np.column_stack([Q1.ravel(), Q2.ravel()]))
        return cls(np.asarray(w).reshape(N, N))

    def column_counts(self) -> np.ndarray:
        """Buyer-1 cells per column (fixed ``q1``)."""
        return (self.colors == 1).sum(axis=1)

    def row_counts(self) -> np.ndarray:
        """Buyer-2 cells per row (fixed ``q2``)."""
        return (self.colors == 2).sum(axis=0)

    def interim(self):
        """Measured ``(x1 per column, x2 per row)`` at cell centres."""
        return self.column_counts() / self.N, self.row_counts() / self.N

    def seller_measure(self) -> float:
        return float((self.colors == 0).mean())

    def is_monotone(self) -> bool:
        """Each buyer's cells form an up-set in that buyer's own coordinate."""
        one = self.colors == 1
        two = self.colors == 2
        ok1 = not np.any(one[:-1, :] & ~one[1:, :])
        ok2 = not np.any(two[:, :-1] & ~two[:, 1:])
        return ok1 and ok2


def rearrange_coloring(grid: ColorGrid) -> ColorGrid:
    """Threshold-form coloring with the same per-line counts.

    Column ``i1`` gets buyer 1 on its lowest ``count`` cells in ``q2``; row
    ``i2`` gets buyer 2 on its lowest ``count`` cells in ``q1``. For a
    monotone input the two regions never overlap.
    """
    if not grid.is_monotone():
        raise InvalidInputError("coloring is not monotone in own coordinates; no DSIC rule induces it")
    N = grid.N
    c1 = grid.column_counts()
    c2 = grid.row_counts()
    idx = np.arange(N)
    one = idx[None, :] < c1[:, None]
    two = idx[:, None] < c2[None, :]
    if np.any(one & two):
        raise InvalidInputError("rearranged regions overlap; input coloring is inconsistent")
    out = np.zeros((N, N), dtype=np.int8)
    out[one] = 1
    out[two] = 2
    return ColorGrid(out)


# ---------------------------------------------------------------------------
# the always-sold sequence
# ---------------------------------------------------------------------------

@dataclass
class SequenceResult:
    p: Fraction
    u: list
    first_violation: int | None

    def residuals(self) -> list:
        """``u_n + u_{n+2} - 2p u_{n+1} - (1 - p)`` at every index (all zero)."""
        p, u = self.p, self.u
        return [u[i] + u[i + 2] - 2 * p * u[i + 1] - (1 - p) for i in range(len(u) - 2)]

    def to_dict(self):
        return {"p": _num(self.p), "u": [_num(x) for x in self.u], "first_violation": self.first_violation}


def _num(x):
    """Exact rationals with terminating decimals become floats; others stay strings."""
    f = float(x)
    return f if Fraction(f) == x else str(x)


def corollary_sequence(p, max_n: int = 20) -> SequenceResult:
    """Iterate ``u_{n+2} = 2p u_{n+1} + (1-p) - u_n`` from ``u_1 = 0, u_2 = 1-p`` exactly.

    Stops at the first index (1-based) with ``u_n > 1``, which is included.
    """
    p = to_fraction(p)
    if not 0 <= p <= 1:
        raise InvalidInputError("p must lie in [0, 1]")
    if max_n < 1:
        raise InvalidInputError("max_n must be positive")
    u = [Fraction(0), 1 - p][:max_n]
    first = None
    for i, val in enumerate(u):
        if val > 1:
            first = i + 1
            break
    while first is None and len(u) < max_n:
        nxt = 2 * p * u[-1] + (1 - p) - u[-2]
        u.append(nxt)
        if nxt > 1:
            first = len(u)
    return SequenceResult(p, u, first)


# ---------------------------------------------------------------------------
# three buyers with constant interim allocations
# ---------------------------------------------------------------------------

@dataclass
class ThreeBuyerCheck:
    implementable: bool
    slack: float


def three_buyer_check(c1: float, c2: float, c3: float, tol: float = 1e-12) -> ThreeBuyerCheck:
    cs = (c1, c2, c3)
    if any(not 0.0 <= c <= 1.0 for c in cs):
        raise InvalidInputError("each c_i must lie in [0, 1]")
    slack = (1.0 - sum(cs)) - 2.0 * math.sqrt(c1 * c2 * c3)
    return ThreeBuyerCheck(slack >= -tol, float(slack))


@dataclass
class TripleAllocation:
    c: tuple
    y: tuple
    delta: float

    def __call__(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != 3:
            raise InvalidInputError("three-buyer rule needs profiles with 3 columns")
        y1, y2, y3 = self.y
        v1, v2, v3 = Q[:, 0], Q[:, 1], Q[:, 2]
        w1 = (v2 <= y1) & (v3 > y2)
        w2 = (v3 <= y2) & (v1 > y3)
        w3 = (v1 <= y3) & (v2 > y1)
        return np.where(w1, 1, np.where(w2, 2, np.where(w3, 3, 0))).astype(np.int64)

    def interim(self) -> tuple:
        """Analytic constant interim allocations ``y1(1-y2), y2(1-y3), y3(1-y1)``."""
        y1, y2, y3 = self.y
        return (y1 * (1 - y2), y2 * (1 - y3), y3 * (1 - y1))

    def to_dict(self):
        return {"c": list(self.c), "y": list(self.y), "delta": self.delta,
                "interim": list(self.interim())}


def three_buyer_construct(c1: float, c2: float, c3: float, tol: float = 1e-12) -> TripleAllocation:
    """Thresholds ``y_i`` and the cyclic rule realising at least ``c_i`` for each buyer."""
    chk = three_buyer_check(c1, c2, c3, tol)
    if not chk.implementable:
        raise InvalidInputError(f"condition fails with slack {chk.slack:.6g}")
    s = c1 + c2 + c3
    delta = (s - 1.0) ** 2 - 4.0 * c1 * c2 * c3
    root = math.sqrt(max(delta, 0.0))

    def y(ci, cj, ck):
        # (1 + c_i - c_j - c_k + sqrt(delta)) / (2 (1 - c_j)); the 0/0 case c_j = 1
        # forces c_i = c_k = 0 and leaves y_i free
        den = 2.0 * (1.0 - cj)
        if den <= 0.0:
            return 1.0
        return float(min(max((1.0 + ci - cj - ck + root) / den, 0.0), 1.0))

    ys = (y(c1, c2, c3), y(c2, c3, c1), y(c3, c1, c2))
    return TripleAllocation((c1, c2, c3), ys, float(delta))
