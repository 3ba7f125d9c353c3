"""Interim allocation curves in quantile space and the checks built on them."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .priors import QuantileModel

DEFAULT_N = 2048
MONO_TOL = 1e-12
N_BINS = 64
SHARD = 1 << 16


class TruncationWarning(RuntimeWarning):
    """An integral over an unbounded quantile function was cut short of q = 1."""


def uniform_grid(N: int = DEFAULT_N) -> np.ndarray:
    if N < 2:
        raise InvalidInputError("a grid needs at least two points")
    return np.linspace(0.0, 1.0, N)


@dataclass(frozen=True)
class InterimCurve:
    """``x(q)`` sampled on an ascending grid over [0, 1], read piecewise-linearly."""

    grid: np.ndarray
    values: np.ndarray

    def __init__(self, grid, values):
        g = np.asarray(grid, dtype=float).copy()
        v = np.asarray(values, dtype=float).copy()
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise InvalidInputError("grid and values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(g) <= 0):
            raise InvalidInputError("curve grid must be strictly increasing")
        if g[0] < 0 or g[-1] > 1:
            raise InvalidInputError("curve grid must lie in [0, 1]")
        if np.any(v < -MONO_TOL) or np.any(v > 1 + MONO_TOL):
            raise InvalidInputError("interim values must lie in [0, 1]")
        if np.any(np.diff(v) < -MONO_TOL):
            raise InvalidInputError("interim curve must be nondecreasing")
        v = np.clip(v, 0.0, 1.0)
        g.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn: Callable, N: int = DEFAULT_N, grid=None) -> "InterimCurve":
        g = uniform_grid(N) if grid is None else np.asarray(grid, dtype=float)
        return cls(g, np.broadcast_to(np.asarray(fn(g), dtype=float), g.shape))

    @classmethod
    def constant(cls, c: float, N: int = DEFAULT_N) -> "InterimCurve":
        return cls.from_function(lambda q: np.full_like(q, c), N)

    def __call__(self, q):
        return np.interp(q, self.grid, self.values)

    def tail(self) -> np.ndarray:
        """``P(q_j) = int_{q_j}^1 x`` at every knot (trapezoid, exact for the interpolant)."""
        seg = 0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.grid)
        out = np.zeros_like(self.grid)
        out[:-1] = np.cumsum(seg[::-1])[::-1]
        return out + self._right_pad()

    def _right_pad(self):
        return self.values[-1] * (1.0 - self.grid[-1])

    def tail_at(self, q) -> np.ndarray:
        """``P(q)`` at arbitrary points, exact for the piecewise-linear curve."""
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        g, v, P = self.grid, self.values, self.tail()
        idx = np.clip(np.searchsorted(g, q, side="right") - 1, 0, g.size - 1)
        # below the first knot the curve is held at values[0]
        below = q < g[0]
        left = g[idx]
        xl = v[idx]
        xr = np.where(idx + 1 < g.size, v[np.minimum(idx + 1, g.size - 1)], v[-1])
        gr = np.where(idx + 1 < g.size, g[np.minimum(idx + 1, g.size - 1)], 1.0)
        width = np.where(gr > left, gr - left, 1.0)
        xq = xl + (xr - xl) * np.clip((q - left) / width, 0, 1)
        out = P[idx] - 0.5 * (xl + xq) * (q - left)
        out = np.where(below, P[0] + v[0] * (g[0] - q), out)
        return np.maximum(out, 0.0)

    def mass(self) -> float:
        return float(self.tail_at(0.0))

    def scaled(self, s: float) -> "InterimCurve":
        return InterimCurve(self.grid, self.values * s)


# ---------------------------------------------------------------------------
# Border checks
# ---------------------------------------------------------------------------

@dataclass
class BorderReport:
    feasible: bool
    worst_threshold: object
    lhs: float
    rhs: float
    margin: float
    tol: float
    tight_set: list = field(default_factory=list)
    tight_count: int = 0

    def to_dict(self):
        wt = self.worst_threshold
        return {
            "feasible": self.feasible,
            "worst_threshold": list(map(float, wt)) if isinstance(wt, (tuple, list, np.ndarray)) else float(wt),
            "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "tol": self.tol,
            "tight_count": self.tight_count,
            "tight_set": [list(map(float, t)) if isinstance(t, (tuple, list, np.ndarray)) else float(t)
                          for t in self.tight_set],
        }


def quadrature_tol(grid) -> float:
    """Default slack for Border tests: trapezoid error is O(step^2)."""
    step = float(np.max(np.diff(grid)))
    return max(1e-9, step * step)


TIGHT_LIMIT = 4096


def border_check_symmetric(curve: InterimCurve, n: int, tol: float | None = None) -> BorderReport:
    """``int_q^1 x <= (1 - q^n)/n`` at every knot of ``curve``."""
    if n < 1:
        raise InvalidInputError("need n >= 1")
    q = curve.grid
    tol = quadrature_tol(q) if tol is None else tol
    lhs = curve.tail()
    rhs = (1.0 - q ** n) / n
    gap = lhs - rhs
    j = int(np.argmax(gap))
    tight = np.nonzero(np.abs(gap) <= tol)[0]
    return BorderReport(bool(gap[j] <= tol), float(q[j]), float(lhs[j]), float(rhs[j]),
                        float(gap[j]), tol, [float(q[t]) for t in tight[:TIGHT_LIMIT]], int(tight.size))


def _axis_points(curve: InterimCurve, per_axis: int, refine: int) -> np.ndarray:
    knots = curve.grid
    if knots.size > per_axis:
        knots = knots[np.unique(np.linspace(0, knots.size - 1, per_axis).round().astype(int))]
    return np.unique(np.concatenate([knots, np.linspace(0, 1, refine + 1), [0.0, 1.0]]))


def border_check_asymmetric(models: Sequence[QuantileModel] | None, curves: Sequence[InterimCurve],
                            grid: int = 64, tol: float | None = None,
                            max_points: int = 4_000_000) -> BorderReport:
    """``sum_i int_{q_i}^1 x_i <= 1 - prod_i q_i`` on a threshold lattice.

    The lattice is the tensor product, per buyer, of that curve's knots and a
    uniform refinement with ``grid`` cells. For many buyers the knots are
    thinned so the lattice stays below ``max_points``.
    """
    n = len(curves)
    if models is not None and len(models) != n:
        raise InvalidInputError(f"{len(models)} models for {n} curves")
    if grid is None or int(grid) < 1:
        raise InvalidInputError("lattice resolution must be a positive integer")
    grid = int(grid)
    per_axis = max(2, int(max_points ** (1.0 / n)))
    axes = [_axis_points(c, per_axis, min(grid, per_axis)) for c in curves]
    tails = [c.tail_at(a) for c, a in zip(curves, axes)]
    tol = max(quadrature_tol(c.grid) for c in curves) if tol is None else tol

    # one first-axis threshold at a time keeps memory at one lattice slice
    rest_lhs = np.zeros(1)
    rest_prod = np.ones(1)
    for a, t in zip(axes[1:], tails[1:]):
        rest_lhs = (rest_lhs[:, None] + t[None, :]).ravel()
        rest_prod = (rest_prod[:, None] * a[None, :]).ravel()
    rest_shape = [a.size for a in axes[1:]]
    best = (-np.inf, None, 0.0, 0.0)
    tight, tight_count = [], 0
    for i0, (q0, t0) in enumerate(zip(axes[0], tails[0])):
        lhs = t0 + rest_lhs
        rhs = 1.0 - q0 * rest_prod
        gap = lhs - rhs
        j = int(np.argmax(gap))
        if gap[j] > best[0]:
            best = (float(gap[j]), (i0, j), float(lhs[j]), float(rhs[j]))
        hits = np.nonzero(np.abs(gap) <= tol)[0]
        tight_count += int(hits.size)
        for h in hits[: max(0, TIGHT_LIMIT - len(tight))]:
            tight.append(_lattice_point(axes, i0, int(h), rest_shape))
    gap, (i0, j), lhs, rhs = best
    return BorderReport(bool(gap <= tol), _lattice_point(axes, i0, j, rest_shape), lhs, rhs,
                        gap, tol, tight, tight_count)


def _lattice_point(axes, i0, flat, rest_shape):
    pt = [float(axes[0][i0])]
    if rest_shape:
        for a, k in zip(axes[1:], np.unravel_index(flat, rest_shape)):
            pt.append(float(a[k]))
    return tuple(pt)


# ---------------------------------------------------------------------------
# revenue and welfare
# ---------------------------------------------------------------------------

def _integrate(model: QuantileModel, curve: InterimCurve, fn_name: str):
    q = curve.grid
    x = curve.values
    truncated = False
    if not model.bounded:
        keep = q < 1.0
        truncated = not keep.all()
        q, x = q[keep], x[keep]
        if truncated:
            warnings.warn("integrand is unbounded at q = 1; integral truncated to the grid below 1",
                          TruncationWarning, stacklevel=3)
    f = getattr(model, fn_name)(q) * x
    return float(np.trapezoid(f, q) if hasattr(np, "trapezoid") else np.trapz(f, q)), truncated


def rev_wel_from_curve(model: QuantileModel, curves, n: int | None = None) -> tuple:
    """``(REV, WEL) = (sum_i int phi x_i, sum_i int v x_i)``.

    ``curves`` is a list (one per buyer) or a single curve replicated ``n``
    times. ``model`` may be a list of per-buyer models.
    """
    if isinstance(curves, InterimCurve):
        curves = [curves] * (n or 1)
    models = model if isinstance(model, (list, tuple)) else [model] * len(curves)
    if len(models) != len(curves):
        raise InvalidInputError("model list and curve list differ in length")
    rev = wel = 0.0
    for m, c in zip(models, curves):
        rev += _integrate(m, c, "virtual")[0]
        wel += _integrate(m, c, "value")[0]
    return rev, wel


@dataclass
class SumEqualReport:
    sums_equal: bool
    max_sum_gap: float
    rev_delta: float
    wel_delta: float


def sum_equal_rev_wel(model: QuantileModel, curves_a, curves_b, tol: float = 1e-9) -> SumEqualReport:
    """Compares two profiles whose per-q totals may coincide."""
    if not curves_a or len(curves_a) != len(curves_b):
        raise InvalidInputError("profiles must be non-empty with equal buyer counts")
    g = curves_a[0].grid
    for c in list(curves_a) + list(curves_b):
        if c.grid.shape != g.shape or not np.array_equal(c.grid, g):
            raise InvalidInputError("all curves must share one grid")
    sa = np.sum([c.values for c in curves_a], axis=0)
    sb = np.sum([c.values for c in curves_b], axis=0)
    gap = float(np.max(np.abs(sa - sb)))
    ra, wa = rev_wel_from_curve(model, list(curves_a))
    rb, wb = rev_wel_from_curve(model, list(curves_b))
    return SumEqualReport(gap <= tol, gap, ra - rb, wa - wb)


# ---------------------------------------------------------------------------
# Monte-Carlo estimator for ex-post rules
# ---------------------------------------------------------------------------

@dataclass
class SimulationResult:
    n: int
    samples: int
    seed: int
    bin_edges: np.ndarray
    counts: np.ndarray          # (n, bins) samples whose own quantile fell in the bin
    wins: np.ndarray            # (n, bins)
    rev_hat: float
    wel_hat: float
    rev_stderr: float
    wel_stderr: float

    @property
    def curves(self) -> np.ndarray:
        """Estimated per-buyer interim allocation per bin."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.wins / np.maximum(self.counts, 1), 0.0)

    @property
    def stderr(self) -> np.ndarray:
        p = self.curves
        return np.sqrt(p * (1 - p) / np.maximum(self.counts, 1))

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def interim_curves(self) -> list:
        """Per-buyer estimates as interim curves on the bin centres."""
        return [InterimCurve(self.bin_centers, np.maximum.accumulate(c)) for c in self.curves]

    def to_dict(self):
        return {
            "n": self.n, "samples": self.samples, "seed": self.seed,
            "bins": int(self.counts.shape[1]),
            "curves": self.curves.tolist(), "stderr": self.stderr.tolist(),
            "rev_hat": self.rev_hat, "wel_hat": self.wel_hat,
            "rev_stderr": self.rev_stderr, "wel_stderr": self.wel_stderr,
        }


def shard_generator(seed: int, shard: int) -> np.random.Generator:
    """Counter-based stream for one shard; independent of thread count."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(shard),))))


def simulate_expost(rule: Callable, n: int, samples: int = 10**6, seed: int = 0,
                    model: QuantileModel | None = None, n_bins: int = N_BINS,
                    threads: int | None = None, shard_size: int = SHARD) -> SimulationResult:
    """Draw i.i.d. uniform quantile profiles and tally the rule's winners.

    ``rule`` maps an ``(S, n)`` array of quantiles to ``S`` winner codes
    (0 = seller, ``i`` = buyer ``i``). ``model`` (default: uniform) converts
    quantiles to values for the welfare and virtual-surplus estimates.
    """
    if samples < 1 or n < 1:
        raise InvalidInputError("samples and n must be positive")
    if model is None:
        from .priors import uniform
        model = uniform()
    n_shards = -(-samples // shard_size)

    def one(s):
        size = min(shard_size, samples - s * shard_size)
        Q = shard_generator(seed, s).random((size, n))
        w = np.asarray(rule(Q), dtype=np.int64)
        if w.shape != (size,) or w.min(initial=0) < 0 or w.max(initial=0) > n:
            raise InvalidInputError("rule must return one winner code in 0..n per profile")
        counts, wins = kernels.tally(Q, w, n_bins)
        won = w > 0
        rows = np.nonzero(won)[0]
        qw = Q[rows, w[rows] - 1]
        vw = np.zeros(size)
        pw = np.zeros(size)
        if rows.size:
            vw[rows] = model.value(qw)
            pw[rows] = model.virtual(qw)
        return counts, wins, vw.sum(), (vw * vw).sum(), pw.sum(), (pw * pw).sum()

    if threads and threads > 1 and n_shards > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(one, range(n_shards)))
    else:
        parts = [one(s) for s in range(n_shards)]

    counts = np.zeros((n, n_bins), dtype=np.int64)
    wins = np.zeros((n, n_bins), dtype=np.int64)
    sv = sv2 = sp = sp2 = 0.0
    for c, w, a, b, d, e in parts:   # fixed order: bitwise reproducible
        counts += c
        wins += w
        sv, sv2, sp, sp2 = sv + a, sv2 + b, sp + d, sp2 + e
    S = float(samples)
    wel = sv / S
    rev = sp / S
    wel_se = float(np.sqrt(max(sv2 / S - wel * wel, 0.0) / S))
    rev_se = float(np.sqrt(max(sp2 / S - rev * rev, 0.0) / S))
    return SimulationResult(n, samples, seed, np.linspace(0, 1, n_bins + 1), counts, wins,
                            rev, wel, rev_se, wel_se)


def bin_average(fn: Callable, n_bins: int = N_BINS, per_bin: int = 256) -> np.ndarray:
    """Average of a smooth ``fn`` over each equal-width quantile bin (midpoint rule)."""
    u = (np.arange(per_bin) + 0.5) / per_bin
    pts = (np.arange(n_bins)[:, None] + u[None, :]) / n_bins
    return np.asarray(fn(pts.ravel()), dtype=float).reshape(n_bins, per_bin).mean(axis=1)


def bin_average_from_tail(tail: Callable, n_bins: int = N_BINS) -> np.ndarray:
    """Exact bin averages of ``x`` given its tail integral ``P(q) = int_q^1 x``."""
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    P = np.asarray(tail(edges), dtype=float)
    return (P[:-1] - P[1:]) * n_bins


def highest_quantile_rule(Q: np.ndarray) -> np.ndarray:
    """Efficient rule: highest quantile wins (ties to the lower index)."""
    return np.argmax(Q, axis=1) + 1


def seller_keeps_rule(Q: np.ndarray) -> np.ndarray:
    return np.zeros(Q.shape[0], dtype=np.int64)


@dataclass
class AgreementReport:
    ok: bool
    max_z: float
    worst_bin: int
    sigmas: float
    z: np.ndarray

    def to_dict(self):
        return {"ok": self.ok, "max_z": self.max_z, "worst_bin": self.worst_bin,
                "sigmas": self.sigmas, "z": self.z.tolist()}


def total_agreement(sim: SimulationResult, expected, sigmas: float = 3.0,
                    floor: float = 1e-12) -> AgreementReport:
    """z-scores of the summed per-buyer bin estimates against ``expected``.

    The buyers' bin estimates come from independent coordinates, so their
    binomial variances add. Bins with zero estimated variance compare exactly
    (``floor`` guards the division).
    """
    expected = np.asarray(expected, dtype=float)
    total = sim.curves.sum(axis=0)
    var = (sim.stderr ** 2).sum(axis=0)
    dev = np.abs(total - expected)
    z = np.where(var > 0, dev / np.sqrt(np.maximum(var, floor * floor)), np.where(dev <= 1e-9, 0.0, np.inf))
    j = int(np.argmax(z))
    return AgreementReport(bool(z[j] <= sigmas), float(z[j]), j, sigmas, z)
