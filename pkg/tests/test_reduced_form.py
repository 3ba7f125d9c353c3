import numpy as np
import pytest
from hypothesis import given, strategies as st

from mechlab import InvalidInputError
from mechlab import priors as pr
from mechlab import reduced_form as rf
from mechlab.reduced_form import InterimCurve

ID = InterimCurve.from_function(lambda q: q)


def step(at, level=1.0, N=2048, eps=1e-12):
    g = np.union1d(np.linspace(0, 1, N), [at, at + eps])
    return InterimCurve(g, np.where(g > at, level, 0.0))


def test_curve_validation():
    with pytest.raises(InvalidInputError):
        InterimCurve([0, 0.5, 0.4, 1], [0, 0, 0, 0])
    with pytest.raises(InvalidInputError):
        InterimCurve([0, 1], [0.5, 0.2])
    with pytest.raises(InvalidInputError):
        InterimCurve([0, 1], [0, 1.5])


@pytest.mark.parametrize("n", [2, 3, 5])
def test_symmetric_tight_power_curves(n):
    curve = InterimCurve.from_function(lambda q: q ** (n - 1))
    rep = rf.border_check_symmetric(curve, n)
    assert rep.feasible
    q = curve.grid
    step_sq = float(np.max(np.diff(q))) ** 2
    assert np.max(np.abs(curve.tail() - (1 - q ** n) / n)) <= step_sq


def test_symmetric_examples():
    one = InterimCurve.constant(1.0)
    rep = rf.border_check_symmetric(one, 2)
    assert not rep.feasible
    assert rep.worst_threshold == 0.0
    assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(0.5)
    zero = rf.border_check_symmetric(InterimCurve.constant(0.0), 2)
    assert zero.feasible and zero.tight_set == [1.0]


def test_asymmetric_examples():
    rep = rf.border_check_asymmetric(None, [ID, ID], 33)
    assert rep.feasible
    # slack is (q1 - q2)^2 / 2, so tight points hug the diagonal
    assert all(abs(a - b) <= np.sqrt(2 * rep.tol) + 1e-12 for a, b in rep.tight_set)
    assert any(a == b for a, b in rep.tight_set)
    one, zero = InterimCurve.constant(1.0), InterimCurve.constant(0.0)
    bad = rf.border_check_asymmetric(None, [one, one], 16)
    assert not bad.feasible and tuple(bad.worst_threshold) == (0.0, 0.0)
    assert rf.border_check_asymmetric(None, [one, zero], 16).feasible
    with pytest.raises(InvalidInputError):
        rf.border_check_asymmetric(None, [ID, ID], 0)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_halving_preserves_feasibility(a, b):
    curves = [InterimCurve.from_function(lambda q: q ** 2 * a), InterimCurve.from_function(lambda q: q * b)]
    if rf.border_check_asymmetric(None, curves, 17).feasible:
        assert rf.border_check_asymmetric(None, [c.scaled(0.5) for c in curves], 17).feasible


def test_rev_wel_examples():
    u = pr.uniform()
    rev, wel = rf.rev_wel_from_curve(u, [ID, ID])
    assert rev == pytest.approx(1 / 3, abs=1e-6) and wel == pytest.approx(2 / 3, abs=1e-6)
    assert rf.rev_wel_from_curve(u, [InterimCurve.constant(0.0)]) == (0.0, 0.0)
    rev, wel = rf.rev_wel_from_curve(u, [step(0.5)])
    assert wel == pytest.approx(3 / 8, abs=1e-6) and rev == pytest.approx(1 / 4, abs=1e-6)


@pytest.mark.parametrize("c", [0.0, 0.5, 1.0])
def test_rev_wel_constant(c):
    rev, wel = rf.rev_wel_from_curve(pr.uniform(), InterimCurve.constant(c), 1)
    assert rev == pytest.approx(0.0, abs=1e-12) and wel == pytest.approx(c / 2, abs=1e-12)


def test_powerlaw_truncation_warns():
    with pytest.warns(rf.TruncationWarning):
        rf.rev_wel_from_curve(pr.powerlaw(1.0), [ID])


def test_sum_equal():
    u = pr.uniform()
    g = np.linspace(0, 1, 2049)
    mk = lambda f: InterimCurve(g, f(g))
    same = rf.sum_equal_rev_wel(u, [mk(lambda q: q)] * 2, [mk(lambda q: 0.5 * 2 * q), mk(lambda q: q)])
    assert same.sums_equal and same.rev_delta == 0 and same.wel_delta == 0
    moved = rf.sum_equal_rev_wel(u, [mk(lambda q: q)] * 2, [mk(lambda q: q ** 2), mk(lambda q: 2 * q - q ** 2)])
    assert moved.sums_equal and abs(moved.rev_delta) <= 1e-9 and abs(moved.wel_delta) <= 1e-9
    assert not rf.sum_equal_rev_wel(u, [mk(lambda q: q)] * 2, [mk(lambda q: q), mk(lambda q: q ** 2)]).sums_equal
    with pytest.raises(InvalidInputError):
        rf.sum_equal_rev_wel(u, [ID], [InterimCurve.constant(0.0, N=100)])


def test_simulate_efficient_rule():
    sim = rf.simulate_expost(rf.highest_quantile_rule, 2, 10**6, seed=3)
    expected = rf.bin_average_from_tail(ID.tail_at, 64)
    z = np.abs(sim.curves - expected[None, :]) / np.maximum(sim.stderr, 1e-12)
    assert z.max() <= 4.5       # 128 comparisons; 3 sigma each is checked in aggregate below
    assert np.mean(z <= 3) >= 0.97
    assert sim.rev_hat == pytest.approx(1 / 3, abs=4 * sim.rev_stderr)
    assert sim.wel_hat == pytest.approx(2 / 3, abs=4 * sim.wel_stderr)


def test_simulate_seller_keeps():
    sim = rf.simulate_expost(rf.seller_keeps_rule, 3, 10**4, seed=0)
    assert not sim.wins.any() and sim.rev_hat == 0 and sim.wel_hat == 0


def test_stderr_scaling():
    a = rf.simulate_expost(rf.highest_quantile_rule, 2, 2 * 10**5, seed=1)
    b = rf.simulate_expost(rf.highest_quantile_rule, 2, 4 * 10**5, seed=1)
    ratio = b.wel_stderr / a.wel_stderr
    assert abs(ratio - 2 ** -0.5) <= 0.2 * 2 ** -0.5


def test_simulation_is_thread_independent():
    a = rf.simulate_expost(rf.highest_quantile_rule, 3, 3 * 10**5, seed=9, threads=1)
    b = rf.simulate_expost(rf.highest_quantile_rule, 3, 3 * 10**5, seed=9, threads=4)
    assert np.array_equal(a.wins, b.wins) and a.wel_hat == b.wel_hat
