"""Small dense linear-program solver (two-phase tableau simplex).

Rational mode runs on :class:`fractions.Fraction` entries and is exact;
float mode uses IEEE doubles with a ``1e-9`` feasibility/optimality
tolerance and the numba kernel when available.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .priors import to_fraction

FLOAT_TOL = 1e-9
INF = float("inf")
RELATIONS = {"<=": "<=", "le": "<=", ">=": ">=", "ge": ">=", "=": "=", "==": "=", "eq": "="}


@dataclass
class LpProblem:
    """``sense`` c.x subject to rows ``(coeffs, relation, bound)`` and variable bounds.

    ``bounds`` defaults to ``(0, inf)`` for every variable; use ``None`` or
    ``+-inf`` for an open side.
    """

    objective: Sequence
    sense: str = "max"
    constraints: list = field(default_factory=list)
    bounds: list | None = None

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise InvalidInputError(f"sense must be 'max' or 'min', got {self.sense!r}")
        n = len(self.objective)
        if n == 0:
            raise InvalidInputError("objective must have at least one variable")
        rows = []
        for k, row in enumerate(self.constraints):
            try:
                coeffs, rel, bound = row
            except (TypeError, ValueError):
                raise InvalidInputError(f"constraint {k} is not a (coeffs, relation, bound) triple")
            if len(coeffs) != n:
                raise InvalidInputError(f"constraint {k} has width {len(coeffs)}, expected {n}")
            if rel not in RELATIONS:
                raise InvalidInputError(f"constraint {k}: unknown relation {rel!r}")
            rows.append((list(coeffs), RELATIONS[rel], bound))
        self.constraints = rows
        if self.bounds is None:
            self.bounds = [(0, INF)] * n
        if len(self.bounds) != n:
            raise InvalidInputError("bounds length differs from the objective width")
        cleaned = []
        for lo, hi in self.bounds:
            lo = -INF if lo is None else lo
            hi = INF if hi is None else hi
            if lo > hi:
                raise InvalidInputError(f"variable bound lo={lo} > hi={hi}")
            cleaned.append((lo, hi))
        self.bounds = cleaned

    @property
    def n_vars(self):
        return len(self.objective)

    def add(self, coeffs, rel, bound):
        self.constraints.append((list(coeffs), RELATIONS[rel], bound))


@dataclass
class LpSolution:
    status: str
    values: list | None = None
    objective_value: object = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == "optimal"


def _is_inf(x):
    return isinstance(x, float) and np.isinf(x)


class _StandardForm:
    """max c'y s.t. A y (<=,>=,=) b, y >= 0, with the map back to x."""

    def __init__(self, prob: LpProblem, conv):
        n = prob.n_vars
        self.conv = conv
        zero, one = conv(0), conv(1)
        cols = []          # (original var, sign)
        offset = [zero] * n
        extra_rows = []    # upper bounds on shifted vars; (col, bound)
        for j, (lo, hi) in enumerate(prob.bounds):
            if not _is_inf(lo):
                offset[j] = conv(lo)
                cols.append((j, one))
                if not _is_inf(hi):
                    extra_rows.append((len(cols) - 1, conv(hi) - conv(lo)))
            elif not _is_inf(hi):
                offset[j] = conv(hi)
                cols.append((j, -one))
            else:
                cols.append((j, one))
                cols.append((j, -one))
        self.cols = cols
        self.offset = offset
        ny = len(cols)
        sign = 1 if prob.sense == "max" else -1
        c = [conv(x) for x in prob.objective]
        self.c = [sign * c[j] * s for j, s in cols]
        self.c0 = sign * sum((c[j] * offset[j] for j in range(n)), zero)
        A, rel, b = [], [], []
        for coeffs, r, bound in prob.constraints:
            a = [conv(x) for x in coeffs]
            A.append([a[j] * s for j, s in cols])
            rel.append(r)
            b.append(conv(bound) - sum((a[j] * offset[j] for j in range(n)), zero))
        for col, ub in extra_rows:
            row = [zero] * ny
            row[col] = one
            A.append(row)
            rel.append("<=")
            b.append(ub)
        self.A, self.rel, self.b = A, rel, b
        self.sign = sign

    def recover(self, y):
        x = list(self.offset)
        for (j, s), yk in zip(self.cols, y):
            x[j] = x[j] + s * yk
        return x


def solve(problem: LpProblem, mode: str = "float", max_iter: int = 50000) -> LpSolution:
    """Solve ``problem`` by the two-phase simplex method.

    Parameters
    ----------
    mode : {"rational", "float"}
        ``rational`` converts every coefficient with ``Fraction`` and returns
        exact values; ``float`` works in doubles.
    """
    if mode == "rational":
        conv, dtype, eps, zero = to_fraction, object, Fraction(0), Fraction(0)
    elif mode == "float":
        conv, dtype, eps, zero = float, np.float64, FLOAT_TOL, 0.0
    else:
        raise InvalidInputError(f"mode must be 'rational' or 'float', got {mode!r}")
    sf = _StandardForm(problem, conv)
    m, ny = len(sf.A), len(sf.c)

    A = np.array(sf.A, dtype=dtype).reshape(m, ny) if m else np.zeros((0, ny), dtype=dtype)
    b = np.array(sf.b, dtype=dtype) if m else np.zeros(0, dtype=dtype)
    rel = list(sf.rel)
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            rel[i] = {"<=": ">=", ">=": "<=", "=": "="}[rel[i]]

    n_slack = sum(r != "=" for r in rel)
    n_art = sum(r != "<=" for r in rel)
    ncol = ny + n_slack + n_art
    T = np.zeros((m + 1, ncol + 1), dtype=dtype)
    if dtype is object:
        T[:] = zero
    T[:m, :ny] = A
    T[:m, -1] = b
    basis = np.zeros(m, dtype=np.int64)
    s_col, a_col = ny, ny + n_slack
    art_cols = []
    for i, r in enumerate(rel):
        if r == "<=":
            T[i, s_col] = 1
            basis[i] = s_col
            s_col += 1
        else:
            if r == ">=":
                T[i, s_col] = -1
                s_col += 1
            T[i, a_col] = 1
            basis[i] = a_col
            art_cols.append(a_col)
            a_col += 1

    total_iter = 0
    if art_cols:
        # phase 1: maximise -sum(artificials); reduced costs = -sum of their rows
        art_rows = [i for i in range(m) if basis[i] >= ny + n_slack]
        T[m, :] = zero
        for i in art_rows:
            T[m, :] -= T[i, :]
        for col in art_cols:
            T[m, col] = zero
        status, it = kernels.simplex(T, basis, eps, max_iter)
        total_iter += it
        if status == kernels.ITER_LIMIT:
            return LpSolution("iteration_limit", iterations=total_iter)
        if T[m, -1] < -(eps * max(1.0, float(np.abs(b).max()) if m else 1.0)):
            return LpSolution("infeasible", iterations=total_iter)
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= ny + n_slack:
                row = T[i, : ny + n_slack]
                nz = np.nonzero(np.abs(row.astype(float)) > (eps if mode == "float" else 0))[0]
                if nz.size:
                    kernels.pivot(T, i, int(nz[0]), eps)
                    basis[i] = int(nz[0])
                else:
                    keep[i] = False
        rows = np.concatenate([np.nonzero(keep)[0], [m]])
        T = T[rows][:, list(range(ny + n_slack)) + [ncol]]
        basis = basis[keep]
        m = int(keep.sum())
        ncol = ny + n_slack

    # phase 2 objective row: reduced cost r_j = c_B B^-1 A_j - c_j
    c_full = np.zeros(ncol, dtype=dtype)
    if dtype is object:
        c_full[:] = zero
    c_full[:ny] = np.array(sf.c, dtype=dtype)
    T[m, :] = zero
    T[m, :ncol] = -c_full
    for i in range(m):
        cb = c_full[basis[i]]
        if cb != 0:
            T[m, :] += cb * T[i, :]
    status, it = kernels.simplex(T, basis, eps, max_iter)
    total_iter += it
    if status == kernels.UNBOUNDED:
        return LpSolution("unbounded", iterations=total_iter)
    if status == kernels.ITER_LIMIT:
        return LpSolution("iteration_limit", iterations=total_iter)
    y = [zero] * ny
    for i in range(m):
        if basis[i] < ny:
            y[basis[i]] = T[i, -1]
    if mode == "float":
        y = [float(v) for v in y]
    x = sf.recover(y)
    obj = sum((conv(cj) * xj for cj, xj in zip(problem.objective, x)), zero)
    return LpSolution("optimal", values=x, objective_value=obj, iterations=total_iter)


def max_violation(problem: LpProblem, x):
    """Largest constraint or bound violation of ``x`` (0 when feasible).

    Exact when ``x`` and the problem data are rationals or integers.
    """
    exact = all(isinstance(v, (int, Fraction)) for v in x)
    conv = to_fraction if exact else float
    worst = conv(0)
    for coeffs, rel, bound in problem.constraints:
        lhs = sum((conv(a) * conv(v) for a, v in zip(coeffs, x)), conv(0))
        bnd = conv(bound)
        if rel == "<=":
            worst = max(worst, lhs - bnd)
        elif rel == ">=":
            worst = max(worst, bnd - lhs)
        else:
            worst = max(worst, abs(lhs - bnd))
    for (lo, hi), v in zip(problem.bounds, x):
        if not _is_inf(lo):
            worst = max(worst, conv(lo) - conv(v))
        if not _is_inf(hi):
            worst = max(worst, conv(v) - conv(hi))
    return worst
