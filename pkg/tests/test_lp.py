from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mechlab import InvalidInputError
from mechlab.lp import LpProblem, max_violation, solve


def test_trivial_max():
    sol = solve(LpProblem([1], "max", [([1], "<=", 1)]))
    assert sol.optimal and sol.values[0] == pytest.approx(1.0)


def test_infeasible():
    prob = LpProblem([1], "min", [([1], ">=", 3), ([1], "<=", 2)])
    assert solve(prob).status == "infeasible"
    assert solve(prob, "rational").status == "infeasible"


def test_unbounded():
    assert solve(LpProblem([1, 1], "max", [([1, -1], "<=", 1)])).status == "unbounded"


def test_equalities_and_free_variables():
    # x + y = 3, x - y = 1 with free variables
    prob = LpProblem([1, 0], "max", [([1, 1], "=", 3), ([1, -1], "=", 1)], [(None, None)] * 2)
    sol = solve(prob, "rational")
    assert sol.values == [2, 1]


def test_malformed():
    with pytest.raises(InvalidInputError):
        LpProblem([1, 2], "max", [([1], "<=", 1)])
    with pytest.raises(InvalidInputError):
        LpProblem([1], "maximize")
    with pytest.raises(InvalidInputError):
        LpProblem([1], "max", [([1], "<", 1)])


def _random_problem(data):
    n = data.draw(st.integers(1, 4))
    m = data.draw(st.integers(1, 5))
    ints = st.integers(-5, 5)
    c = [data.draw(ints) for _ in range(n)]
    rows = [([data.draw(ints) for _ in range(n)], "<=", data.draw(st.integers(0, 10))) for _ in range(m)]
    # a box keeps every instance bounded
    rows += [([1 if j == i else 0 for j in range(n)], "<=", 7) for i in range(n)]
    return LpProblem(c, data.draw(st.sampled_from(["max", "min"])), rows)


@given(st.data())
def test_rational_and_float_agree(data):
    prob = _random_problem(data)
    a, b = solve(prob, "rational"), solve(prob, "float")
    assert a.status == b.status == "optimal"       # 0 is feasible and the box bounds it
    assert abs(float(a.objective_value) - b.objective_value) <= 1e-7
    assert max_violation(prob, a.values) == 0
    assert max_violation(prob, b.values) <= 1e-9


@given(st.data())
def test_no_improving_feasible_perturbation(data):
    prob = _random_problem(data)
    sol = solve(prob, "float")
    x = np.array(sol.values, dtype=float)
    c = np.array(prob.objective, dtype=float)
    sign = 1 if prob.sense == "max" else -1
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    for _ in range(20):
        y = x + 1e-4 * rng.standard_normal(x.size)
        if max_violation(prob, y) <= 0:
            assert sign * (c @ y) <= sign * (c @ x) + 1e-9


def test_rational_values_are_fractions():
    sol = solve(LpProblem([Fraction(1, 3)], "max", [([3], "<=", 1)]), "rational")
    assert sol.values == [Fraction(1, 3)] and sol.objective_value == Fraction(1, 9)
