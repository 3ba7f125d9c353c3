"""Per-buyer concave-envelope reshaping of an interim allocation profile.

For buyer ``i`` let ``h_i(q_i, q_-i) = 1 - prod_j q_j - sum_{j != i} P_j(q_j)``
with ``P_j(q) = int_q^1 x_j`` and ``h_i_low(q_i) = min_{q_-i} h_i``. Being a
minimum of lines in ``q_i`` it is concave, nonincreasing, with slopes in
``[-1, 0]`` and ``h_i_low(1) = 0``. The reshaped curve is ``-h_i_low'`` on
``[s*, 1]`` and 0 below, where ``h_i_low(s*)`` equals buyer ``i``'s mass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InfeasibleError, InvalidInputError
from .priors import check_regular
from .reduced_form import InterimCurve, border_check_asymmetric, rev_wel_from_curve

INNER = 64
RAMP = 1e-13
MASS_TOL = 1e-10
REFINE_SWEEPS = 8


@dataclass
class EnvelopeFunction:
    grid: np.ndarray      # hull vertices (ascending)
    values: np.ndarray    # h_low at the vertices
    s_star: float | None = None

    def __call__(self, q):
        return np.interp(q, self.grid, self.values)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.grid)


def _inverse_crossing(curve: InterimCurve, level: np.ndarray) -> np.ndarray:
    """Smallest ``q`` with ``curve(q) >= level`` (1 when never reached)."""
    g, v = curve.grid, np.maximum.accumulate(curve.values)
    j = np.searchsorted(v, level, side="left")
    out = np.ones_like(level, dtype=float)
    inside = j < v.size
    jj = j[inside]
    lv = level[inside]
    res = np.empty(jj.size)
    first = jj == 0
    res[first] = g[0] if g[0] == 0 else 0.0
    k = jj[~first]
    v0, v1 = v[k - 1], v[k]
    g0, g1 = g[k - 1], g[k]
    t = np.where(v1 > v0, (lv[~first] - v0) / np.where(v1 > v0, v1 - v0, 1.0), 1.0)
    res[~first] = g0 + t * (g1 - g0)
    out[inside] = res
    return out


def _upper_hull(x: np.ndarray, y: np.ndarray):
    """Upper concave hull (monotone chain) of points sorted by ``x``."""
    hx, hy = [], []
    for xi, yi in zip(x, y):
        while len(hx) >= 2:
            x1, y1, x2, y2 = hx[-2], hy[-2], hx[-1], hy[-1]
            if (y2 - y1) * (xi - x1) <= (yi - y1) * (x2 - x1) + 1e-15:
                hx.pop()
                hy.pop()
            else:
                break
        hx.append(xi)
        hy.append(yi)
    return np.array(hx), np.array(hy)


def _eval_grid(curves: Sequence[InterimCurve], buyer: int, grid):
    if grid is not None:
        return np.unique(np.concatenate([np.asarray(grid, dtype=float), [0.0, 1.0]]))
    # kinks of h_low sit where the minimiser jumps across a flat of another
    # curve, i.e. at that curve's levels
    knots = [a for j, c in enumerate(curves) if j != buyer - 1 for a in (c.grid, c.values)]
    return np.unique(np.clip(np.concatenate(knots + [np.linspace(0, 1, 2049)]), 0.0, 1.0))


def _lines(others, Q):
    """Intercepts and slopes (in ``q_i``) of ``h`` at the rows of ``Q``."""
    intercept = 1.0 - sum(c.tail_at(Q[:, j]) for j, c in enumerate(others))
    return intercept, -np.prod(Q, axis=1)


def _coordinate_refine(others, qi, Q, sweeps: int = REFINE_SWEEPS):
    """Coordinate minimisation of ``h`` started from the lattice argmin.

    In each ``q_j`` alone ``h`` is convex with derivative
    ``x_j(q_j) - q_i prod_{k != j} q_k``, so the best ``q_j`` is a crossing.
    """
    Q = Q.astype(float).copy()
    for _ in range(sweeps):
        for j, c in enumerate(others):
            rest = np.prod(np.delete(Q, j, axis=1), axis=1)
            Q[:, j] = _inverse_crossing(c, qi * rest)
    return Q


def envelope(curves: Sequence[InterimCurve], buyer: int, grid=None, inner: int = INNER) -> EnvelopeFunction:
    """``h_i_low`` as the lower envelope of candidate lines, then its upper hull.

    Candidates are a lattice over ``q_-i`` plus the per-point minimisers found
    by exact crossings, so the hull has slopes in ``[-1, 0]`` by construction.
    """
    n = len(curves)
    if n < 2:
        raise InvalidInputError("the envelope needs at least two buyers")
    if not 1 <= buyer <= n:
        raise InvalidInputError(f"buyer must be in 1..{n}")
    qi = _eval_grid(curves, buyer, grid)
    others = [c for j, c in enumerate(curves) if j != buyer - 1]
    axis = np.linspace(0, 1, inner)
    lattice = np.stack([m.ravel() for m in np.meshgrid(*([axis] * (n - 1)), indexing="ij")], axis=1)
    c0, s0 = _lines(others, lattice)
    _, arg = kernels.lower_envelope(qi, c0, s0)
    if n == 2:
        # h is convex in q_2, minimised where x_2 crosses q_1
        refined = _inverse_crossing(others[0], qi)[:, None]
    else:
        refined = _coordinate_refine(others, qi, lattice[arg])
    c1, s1 = _lines(others, refined)
    h, _ = kernels.lower_envelope(qi, np.concatenate([c0, c1]), np.concatenate([s0, s1]))
    hx, hy = _upper_hull(qi, h)
    return EnvelopeFunction(hx, hy)


def _solve_s_star(env: EnvelopeFunction, mass: float) -> float:
    """Smallest ``s`` with ``h_low(s) = mass`` on the piecewise-linear hull."""
    x, y = env.grid, env.values
    if mass >= y[0]:
        return float(x[0])
    lo, hi = 0, x.size - 1
    # y is nonincreasing: bisection over vertices, then exact solve on the segment
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if y[mid] > mass:
            lo = mid
        else:
            hi = mid
    y0, y1 = y[lo], y[hi]
    if y0 == y1:
        return float(x[lo])
    return float(x[lo] + (y0 - mass) / (y0 - y1) * (x[hi] - x[lo]))


def _step_curve(env: EnvelopeFunction, s: float, base_grid) -> InterimCurve:
    """``-h_low'`` on ``[s, 1]`` and 0 below, steps rendered as ``RAMP``-wide ramps."""
    x, slopes = env.grid, -env.slopes
    slopes = np.clip(slopes, 0.0, 1.0)
    slopes = np.maximum.accumulate(slopes)   # concave hull: -slope is nondecreasing
    pts = [0.0]
    vals = [0.0]
    starts = [s] + [v for v in x[1:-1] if v > s]
    levels = []
    for a in starts:
        seg = min(np.searchsorted(x, a, side="right") - 1, slopes.size - 1)
        levels.append(slopes[seg])
    for a, lev in zip(starts, levels):
        if a >= 1.0:
            break
        left = max(a - RAMP, pts[-1])
        if left > pts[-1]:
            pts.append(left)
            vals.append(vals[-1])
        if a > pts[-1]:
            pts.append(a)
            vals.append(lev)
        else:
            vals[-1] = max(vals[-1], lev) if a > 0 else lev
    if pts[-1] < 1.0:
        pts.append(1.0)
        vals.append(vals[-1])
    g = np.array(pts)
    v = np.array(vals)
    fine = np.setdiff1d(np.asarray(base_grid, dtype=float), g)
    # knots from the base grid refine quadrature of smooth integrands
    g_all = np.union1d(g, fine)
    v_all = np.interp(g_all, g, v)
    # keep only points that are strictly increasing (drop tiny duplicates)
    keep = np.concatenate([[True], np.diff(g_all) > 0])
    return InterimCurve(g_all[keep], v_all[keep])


@dataclass
class BuyerTransform:
    curve: InterimCurve
    envelope: EnvelopeFunction
    s_star: float
    mass: float


def transform_buyer(curves: Sequence[InterimCurve], buyer: int, grid=None, inner: int = INNER) -> BuyerTransform:
    env = envelope(curves, buyer, grid, inner)
    mass = curves[buyer - 1].mass()
    top = float(env.values[0])
    if mass > top + MASS_TOL or mass < -MASS_TOL:
        raise InfeasibleError(f"buyer {buyer} mass {mass:.6g} outside [0, {top:.6g}]; profile is not Border-feasible")
    mass = min(max(mass, 0.0), top)
    s = _solve_s_star(env, mass)
    env.s_star = s
    base = np.linspace(0, 1, 2049)
    out = _step_curve(env, s, base) if mass > 0 else InterimCurve(base, np.zeros_like(base))
    return BuyerTransform(out, env, s, mass)


@dataclass
class TransformResult:
    new_curves: list
    wel_delta: float
    rev_delta: float
    s_star: list
    envelopes: list
    feasible_before: bool
    feasible_after: bool

    def to_dict(self):
        return {
            "wel_delta": self.wel_delta, "rev_delta": self.rev_delta, "s_star": self.s_star,
            "feasible_before": self.feasible_before, "feasible_after": self.feasible_after,
            "curves": [{"grid": c.grid.tolist(), "values": c.values.tolist()} for c in self.new_curves],
        }


def transform_all(model, curves: Sequence[InterimCurve], grid=None, inner: int = INNER,
                  lattice: int = 64) -> TransformResult:
    """Sequential per-buyer reshaping, each step seeing the already-updated buyers."""
    curves = list(curves)
    models = model if isinstance(model, (list, tuple)) else [model] * len(curves)
    for m in models:
        if not check_regular(m, 256):
            warnings.warn("model is not regular; the revenue comparison is not guaranteed",
                          RuntimeWarning, stacklevel=2)
            break
    before = border_check_asymmetric(models, curves, lattice)
    if not before.feasible:
        raise InfeasibleError(f"input profile violates Border at {before.worst_threshold} by {before.margin:.3g}")
    work = list(curves)
    s_star, envs = [], []
    for i in range(len(work)):
        bt = transform_buyer(work, i + 1, grid, inner)
        work[i] = bt.curve
        s_star.append(bt.s_star)
        envs.append(bt.envelope)
    after = border_check_asymmetric(models, work, lattice)
    r0, w0 = rev_wel_from_curve(models, curves)
    r1, w1 = rev_wel_from_curve(models, work)
    return TransformResult(work, w1 - w0, r1 - r0, s_star, envs, before.feasible, after.feasible)
