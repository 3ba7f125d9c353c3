"""Discrete and continuous priors in value and quantile space.

A :class:`QuantileModel` exposes ``v(q) = F^{-1}(q)``, its first two
derivatives and the quantile-space virtual value
``phi(q) = v(q) - (1 - q) v'(q)`` together with ``phi'`` and ``phi''``.
Closed-form families use analytic expressions; tabulated models use central
finite differences with step ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, InvalidInputError

SIGN_TOL = 1e-9

FAMILIES = ("uniform", "powerlaw", "table")


def to_fraction(x):
    """Exact rational from an int, Fraction, decimal string or float literal."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    # repr of a float is the shortest decimal that round-trips; that is what a
    # user typing 0.05 meant.
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class DiscretePrior:
    """Finite type space ``values`` (ascending) with probabilities ``probs``.

    With ``exact=True`` both vectors are stored as :class:`fractions.Fraction`
    and every downstream sum is exact.
    """

    values: tuple
    probs: tuple
    exact: bool = True

    def __init__(self, values, probs, exact=True):
        if len(values) != len(probs) or len(values) == 0:
            raise InvalidInputError("values and probs must be non-empty and equal length")
        if exact:
            vals = tuple(to_fraction(v) for v in values)
            prs = tuple(to_fraction(p) for p in probs)
        else:
            vals = tuple(float(v) for v in values)
            prs = tuple(float(p) for p in probs)
        if any(v < 0 for v in vals):
            raise InvalidInputError("values must be non-negative")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise InvalidInputError("values must be strictly increasing")
        if any(p < 0 or p > 1 for p in prs):
            raise InvalidInputError("probabilities must lie in [0, 1]")
        total = sum(prs)
        if exact and total != 1:
            raise InvalidInputError(f"probabilities sum to {total}, not 1")
        if not exact and abs(total - 1.0) > 1e-12:
            raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", prs)
        object.__setattr__(self, "exact", bool(exact))

    @property
    def m(self):
        return len(self.values)

    def zero(self):
        return Fraction(0) if self.exact else 0.0

    def mean(self):
        return sum(v * p for v, p in zip(self.values, self.probs))


@dataclass(frozen=True)
class QuantileModel:
    """Continuous prior described in quantile space.

    Parameters
    ----------
    family : {"uniform", "powerlaw", "table"}
        ``uniform`` is U[0, 1]; ``powerlaw`` has ``F(v) = 1 - v**-alpha`` on
        ``[1, inf)``; ``table`` interpolates ``v`` over the knots ``q``.
    alpha : float
        Power-law exponent (``powerlaw`` only).
    q, v : tuple of float
        Table knots (``table`` only).
    h : float
        Finite-difference step for tabulated derivatives.
    interp : {"linear", "cubic"}
        Interpolant used between table knots.
    """

    family: str = "uniform"
    alpha: float | None = None
    q: tuple = field(default=())
    v: tuple = field(default=())
    h: float = 1e-4
    interp: str = "linear"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown family {self.family!r}")
        if self.family == "powerlaw":
            if self.alpha is None or not self.alpha > 0:
                raise InvalidInputError("power-law exponent alpha must be > 0")
        if self.family == "table":
            q = np.asarray(self.q, dtype=float)
            v = np.asarray(self.v, dtype=float)
            if q.ndim != 1 or q.shape != v.shape or q.size < 2:
                raise InvalidInputError("table needs matching q and v arrays with >= 2 knots")
            if np.any(np.diff(q) <= 0):
                raise InvalidInputError("table q must be strictly increasing")
            if q[0] < 0 or q[-1] > 1:
                raise InvalidInputError("table q must lie in [0, 1]")
            if np.any(np.diff(v) < 0):
                raise InvalidInputError("table v must be nondecreasing")
            if self.interp not in ("linear", "cubic"):
                raise InvalidInputError(f"unknown interpolation {self.interp!r}")
            if not self.h > 0:
                raise InvalidInputError("derivative step h must be positive")
            object.__setattr__(self, "q", tuple(q.tolist()))
            object.__setattr__(self, "v", tuple(v.tolist()))
            if self.interp == "cubic":
                object.__setattr__(self, "_spline", CubicSpline(q, v))

    # -- support -----------------------------------------------------------
    @property
    def bounded(self):
        """True when ``v`` stays finite on the closed interval ``[0, 1]``."""
        return self.family != "powerlaw"

    @property
    def domain(self):
        if self.family == "table":
            return self.q[0], self.q[-1]
        return 0.0, 1.0

    def _check(self, q, allow_one=True):
        q = np.asarray(q, dtype=float)
        lo, hi = self.domain
        if np.any(~np.isfinite(q)) or np.any(q < lo) or np.any(q > hi):
            raise DomainError(f"quantile outside [{lo}, {hi}]")
        if self.family == "powerlaw" and np.any(q >= 1.0):
            raise DomainError("q = 1 is a pole of the power-law quantile function")
        if not allow_one and np.any(q >= 1.0):
            raise DomainError("q = 1 not allowed here")
        return q

    # -- tabulated interpolant ---------------------------------------------
    def _table_v(self, q):
        if self.interp == "cubic":
            return self._spline(q)
        return np.interp(q, self.q, self.v)

    def _fd(self, fn, q, order):
        h = self.h
        lo, hi = self.domain
        q = np.atleast_1d(q).astype(float)
        out = np.empty_like(q)
        left = q - 2 * h < lo
        right = q + 2 * h > hi
        mid = ~(left | right)
        if order == 1:
            qm = q[mid]
            out[mid] = (fn(qm + h) - fn(qm - h)) / (2 * h)
            ql = q[left]
            out[left] = (-3 * fn(ql) + 4 * fn(ql + h) - fn(ql + 2 * h)) / (2 * h)
            qr = q[right & ~left]
            out[right & ~left] = (3 * fn(qr) - 4 * fn(qr - h) + fn(qr - 2 * h)) / (2 * h)
        else:
            qm = q[mid]
            out[mid] = (fn(qm + h) - 2 * fn(qm) + fn(qm - h)) / h**2
            ql = q[left]
            out[left] = (fn(ql) - 2 * fn(ql + h) + fn(ql + 2 * h)) / h**2
            qr = q[right & ~left]
            out[right & ~left] = (fn(qr) - 2 * fn(qr - h) + fn(qr - 2 * h)) / h**2
        return out

    # -- value function and derivatives -------------------------------------
    def value(self, q):
        q = self._check(q)
        if self.family == "uniform":
            return q * 1.0
        if self.family == "powerlaw":
            return (1.0 - q) ** (-1.0 / self.alpha)
        return self._table_v(q)

    def dvalue(self, q):
        q = self._check(q)
        if self.family == "uniform":
            return np.ones_like(q)
        if self.family == "powerlaw":
            a = 1.0 / self.alpha
            return a * (1.0 - q) ** (-a - 1.0)
        return _squeeze_like(self._fd(self._table_v, q, 1), q)

    def d2value(self, q):
        q = self._check(q)
        if self.family == "uniform":
            return np.zeros_like(q)
        if self.family == "powerlaw":
            a = 1.0 / self.alpha
            return a * (a + 1.0) * (1.0 - q) ** (-a - 2.0)
        return _squeeze_like(self._fd(self._table_v, q, 2), q)

    def virtual(self, q):
        q = self._check(q)
        if self.family == "uniform":
            return 2.0 * q - 1.0
        if self.family == "powerlaw":
            a = 1.0 / self.alpha
            return (1.0 - a) * (1.0 - q) ** (-a)
        return self._table_virtual(q)

    def dvirtual(self, q):
        q = self._check(q)
        if self.family == "uniform":
            return np.full_like(q, 2.0)
        if self.family == "powerlaw":
            a = 1.0 / self.alpha
            return (1.0 - a) * a * (1.0 - q) ** (-a - 1.0)
        return _squeeze_like(self._fd(self._table_virtual, q, 1), q)

    def d2virtual(self, q):
        q = self._check(q)
        if self.family == "uniform":
            return np.zeros_like(q)
        if self.family == "powerlaw":
            a = 1.0 / self.alpha
            return (1.0 - a) * a * (a + 1.0) * (1.0 - q) ** (-a - 2.0)
        return _squeeze_like(self._fd(self._table_virtual, q, 2), q)

    def _table_virtual(self, q):
        q = np.asarray(q, dtype=float)
        return self._table_v(q) - (1.0 - q) * _squeeze_like(self._fd(self._table_v, q, 1), q)

    # -- value space ---------------------------------------------------------
    def virtual_value_v(self, v):
        """Value-space virtual value ``v - (1 - F(v)) / f(v)``."""
        v = np.asarray(v, dtype=float)
        if self.family == "uniform":
            if np.any((v < 0) | (v > 1)):
                raise DomainError("value outside the uniform support [0, 1]")
            return 2.0 * v - 1.0
        if self.family == "powerlaw":
            if np.any(v < 1):
                raise DomainError("value below the power-law support [1, inf)")
            return v * (1.0 - 1.0 / self.alpha)
        qv = np.interp(v, self.v, self.q)
        return self.virtual(qv)

    def default_grid(self, grid_size):
        """``{j/N : 0 <= j < N}`` plus ``1 - 1/(2N)``, clipped to the domain."""
        if grid_size < 1:
            raise InvalidInputError("grid_size must be positive")
        g = np.concatenate([np.arange(grid_size) / grid_size, [1.0 - 0.5 / grid_size]])
        lo, hi = self.domain
        g = g[(g >= lo) & (g <= hi)]
        if self.family == "powerlaw":
            g = g[g < 1.0]
        return g

    def to_config(self):
        if self.family == "uniform":
            return {"kind": "uniform"}
        if self.family == "powerlaw":
            return {"kind": "powerlaw", "alpha": self.alpha}
        cfg = {"kind": "table", "q": list(self.q), "v": list(self.v)}
        if self.interp != "linear":
            cfg["interp"] = self.interp
        if self.h != 1e-4:
            cfg["h"] = self.h
        return cfg


def _squeeze_like(out, q):
    return out.reshape(np.shape(q)) if np.ndim(q) else out[0]


def uniform():
    return QuantileModel("uniform")


def powerlaw(alpha):
    return QuantileModel("powerlaw", alpha=float(alpha))


def table(q, v, h=1e-4, interp="linear"):
    return QuantileModel("table", q=tuple(q), v=tuple(v), h=h, interp=interp)


def quantile_value(model: QuantileModel, q):
    """``v(q) = F^{-1}(q)``; raises :class:`DomainError` outside the support."""
    return model.value(q)


def virtual_value_q(model: QuantileModel, q):
    """Quantile-space virtual value ``v(q) - (1 - q) v'(q)``."""
    return model.virtual(q)


class Condition1Report(NamedTuple):
    holds: bool
    worst_q: float
    worst_margin: float


def check_condition1(model: QuantileModel, grid_size: int, tol: float = SIGN_TOL):
    """Check ``v'' >= 0`` and ``phi'' <= 0`` on the default evaluation grid.

    ``worst_margin`` is the most negative of ``v''`` and ``-phi''`` over the
    grid (so the condition holds iff ``worst_margin >= -tol``).
    """
    g = model.default_grid(grid_size)
    margin = np.minimum(np.asarray(model.d2value(g)), -np.asarray(model.d2virtual(g)))
    j = int(np.argmin(margin))
    worst = float(margin[j])
    return Condition1Report(worst >= -tol, float(g[j]), worst)


def check_regular(model: QuantileModel, grid_size: int, tol: float = SIGN_TOL) -> bool:
    """True iff the virtual value is nondecreasing across the evaluation grid."""
    g = model.default_grid(grid_size)
    phi = np.asarray(model.virtual(g))
    return bool(np.all(np.diff(phi) >= -tol))


# -- configuration ------------------------------------------------------------

def model_from_config(cfg: dict) -> QuantileModel:
    kind = _require(cfg, "kind")
    if kind == "uniform":
        return uniform()
    if kind == "powerlaw":
        return powerlaw(float(_require(cfg, "alpha")))
    if kind == "table":
        return table(
            [float(x) for x in _require(cfg, "q")],
            [float(x) for x in _require(cfg, "v")],
            h=float(cfg.get("h", 1e-4)),
            interp=cfg.get("interp", "linear"),
        )
    raise InvalidInputError(f"field 'kind': unknown model kind {kind!r}")


def prior_from_config(cfg: dict, exact: bool = True) -> DiscretePrior:
    kind = _require(cfg, "kind")
    if kind != "discrete":
        raise InvalidInputError(f"field 'kind': expected 'discrete', got {kind!r}")
    return DiscretePrior(_require(cfg, "values"), _require(cfg, "probs"), exact=exact)


def _require(cfg, key):
    if not isinstance(cfg, dict) or key not in cfg:
        raise InvalidInputError(f"missing field {key!r}")
    return cfg[key]


SEPARATION_PRIOR_CONFIG = {"kind": "discrete", "values": ["1", "10", "100"], "probs": ["0.05", "0.15", "0.8"]}


def separation_prior(exact: bool = True) -> DiscretePrior:
    """Three-type prior t = (1, 10, 100), probabilities (0.05, 0.15, 0.8)."""
    return prior_from_config(SEPARATION_PRIOR_CONFIG, exact=exact)


def as_float_array(xs: Sequence) -> np.ndarray:
    return np.asarray([float(x) for x in xs], dtype=float)
