import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mechlab import InvalidInputError
from mechlab import det_border as db
from mechlab.reduced_form import InterimCurve, simulate_expost

ID = InterimCurve.from_function(lambda q: q)
SQ = InterimCurve.from_function(lambda q: (q ** 2 + 1e-3 * q) / 1.001)   # strictly increasing near 0
ROOT = InterimCurve.from_function(np.sqrt)


def test_two_buyer_examples():
    rep = db.check_two_buyer(ID, ID, always_sold=True)
    assert rep.implementable and rep.margin <= 1e-9
    assert db.check_two_buyer(SQ, SQ).implementable
    bad = db.check_two_buyer(ROOT, ROOT)
    assert not bad.implementable and 0 < bad.worst_q < 1
    assert db.check_two_buyer(ID, ID, always_sold=False).implementable


def test_flat_curves_rejected():
    with pytest.raises(InvalidInputError):
        db.check_two_buyer(InterimCurve.constant(0.5), ID)


def test_construct_rejects_infeasible():
    with pytest.raises(InvalidInputError):
        db.construct_two_buyer(ROOT, ROOT)


def test_identity_rule_is_diagonal():
    rule = db.construct_two_buyer(ID, ID)
    g = rule.color_grid(128)
    m1, m2 = g.interim()
    c = (np.arange(128) + 0.5) / 128
    assert np.max(np.abs(m1 - c)) <= 1 / 128 and np.max(np.abs(m2 - c)) <= 1 / 128
    assert g.seller_measure() == 0.0


@pytest.mark.parametrize("N", [128, 256, 512])
def test_construction_reproduces_input(N):
    rule = db.construct_two_buyer(SQ, SQ)
    g = rule.color_grid(N)
    c = (np.arange(N) + 0.5) / N
    m1, m2 = g.interim()
    assert max(np.max(np.abs(m1 - SQ(c))), np.max(np.abs(m2 - SQ(c)))) <= 2 / N
    assert g.is_monotone()


def test_inverse_pair_sells_always():
    x1 = SQ
    g = np.linspace(0, 1, 4097)
    inv = InterimCurve(x1(g), g)           # x2 = x1^{-1}
    assert db.check_two_buyer(x1, inv, always_sold=True, tol=1e-6).implementable
    measures = [db.TwoBuyerRule(x1, inv).color_grid(N).seller_measure() for N in (64, 256)]
    assert measures[1] <= measures[0] and measures[1] <= 4 / 256


def test_simulated_square_curves():
    rule = db.construct_two_buyer(SQ, SQ)
    sim = simulate_expost(rule, 2, 10**6, seed=0)
    edges = np.linspace(0, 1, 65)
    exact = np.array([(SQ.tail_at(a) - SQ.tail_at(b)) * 64 for a, b in zip(edges[:-1], edges[1:])])
    # binomial noise from the exact rate, not from the estimate (low bins have few wins)
    sd = np.sqrt(exact * (1 - exact) / sim.counts)
    z = np.abs(sim.curves - exact[None, :]) / sd
    assert np.mean(z <= 3) >= 0.97 and z.max() <= 4.5


@given(st.floats(0.0, 0.3))
def test_condition_monotone_in_curve(shift):
    # lowering x2 pointwise keeps an implementable pair implementable
    low = InterimCurve(SQ.grid, SQ.values * (1 - shift))
    assert db.check_two_buyer(SQ, low).implementable


def test_rearrangement():
    rule = lambda Q: np.where(Q[:, 0] > 0.5, 1, np.where(Q[:, 1] > 0.5, 2, 0))
    g = db.ColorGrid.from_rule(rule, 64)
    out = db.rearrange_coloring(g)
    assert np.array_equal(out.column_counts(), g.column_counts())
    assert np.array_equal(out.row_counts(), g.row_counts())
    thresh = db.rearrange_coloring(out)
    assert np.array_equal(thresh.colors, out.colors)


def test_rearrangement_fixed_point_on_threshold_rule():
    g = db.construct_two_buyer(SQ, SQ).color_grid(64)
    assert np.array_equal(db.rearrange_coloring(g).colors, g.colors)


def test_rearrangement_rejects_non_monotone():
    colors = np.zeros((8, 8), dtype=int)
    colors[0, 0] = 1                          # buyer 1 wins at a low own quantile only
    with pytest.raises(InvalidInputError):
        db.rearrange_coloring(db.ColorGrid(colors))


@given(st.integers(0, 2**31))
def test_rearrangement_preserves_counts(seed):
    rng = np.random.default_rng(seed)
    N = 32
    t1 = np.sort(rng.random(N))[::-1]          # buyer 1 wins iff q1 > t1(q2)
    t2 = rng.random(N)
    c = (np.arange(N) + 0.5) / N
    one = c[:, None] > t1[None, :]
    two = ~one & (c[None, :] > t2[:, None])
    colors = np.where(one, 1, np.where(two, 2, 0))
    g = db.ColorGrid(colors)
    if not g.is_monotone():
        return
    out = db.rearrange_coloring(g)
    assert np.array_equal(out.column_counts(), g.column_counts())
    assert np.array_equal(out.row_counts(), g.row_counts())


def test_corollary_examples():
    res = db.corollary_sequence(Fraction(3, 4))
    assert res.u[:5] == [0, Fraction(1, 4), Fraction(5, 8), Fraction(15, 16), Fraction(33, 32)]
    assert res.first_violation == 5
    assert all(r == 0 for r in res.residuals())
    assert db.corollary_sequence(1, 12).u == [0] * 12
    half = db.corollary_sequence(0.5, 10)
    assert half.u[:4] == [0, Fraction(1, 2), 1, 1] and half.first_violation is None


@given(st.fractions(0, 1))
def test_corollary_recurrence(p):
    res = db.corollary_sequence(p, 15)
    assert all(r == 0 for r in res.residuals())
    if 0 < p < 1:
        head = []
        for u in res.u:
            head.append(u)
            if u >= 1:
                break
        assert all(b >= a for a, b in zip(head, head[1:]))


def test_three_buyer_check_examples():
    assert db.three_buyer_check(0, 0, 0).slack == 1.0
    ok = db.three_buyer_check(0.2, 0.2, 0.2)
    assert ok.implementable and ok.slack == pytest.approx(0.4 - 2 * math.sqrt(0.008))
    bad = db.three_buyer_check(1 / 3, 1 / 3, 1 / 3)
    assert not bad.implementable and bad.slack == pytest.approx(-2 * math.sqrt(1 / 27))


def test_three_buyer_construct_examples():
    sym = db.three_buyer_construct(0.2, 0.2, 0.2)
    assert sym.delta == pytest.approx(0.128)
    assert sym.y == pytest.approx(((0.8 + math.sqrt(0.128)) / 1.6,) * 3, abs=1e-12)
    assert sym.interim() == pytest.approx((0.2, 0.2, 0.2), abs=1e-12)
    assert db.three_buyer_construct(0, 0, 0).y == (1.0, 1.0, 1.0)
    lop = db.three_buyer_construct(0.5, 0, 0)
    assert lop.y == pytest.approx((1.0, 0.5, 1.0)) and lop.interim()[0] == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        db.three_buyer_construct(1 / 3, 1 / 3, 1 / 3)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_three_buyer_construction_dominates_targets(a, b, c):
    if not db.three_buyer_check(a, b, c).implementable:
        return
    tri = db.three_buyer_construct(a, b, c)
    assert all(0 <= y <= 1 for y in tri.y)
    assert all(x >= t - 1e-9 for x, t in zip(tri.interim(), (a, b, c)))
    Q = np.random.default_rng(0).random((2000, 3))
    y1, y2, y3 = tri.y
    w1 = (Q[:, 1] <= y1) & (Q[:, 2] > y2)
    w2 = (Q[:, 2] <= y2) & (Q[:, 0] > y3)
    w3 = (Q[:, 0] <= y3) & (Q[:, 1] > y1)
    assert not (w1 & w2).any() and not (w2 & w3).any() and not (w1 & w3).any()


def test_three_buyer_monte_carlo():
    tri = db.three_buyer_construct(0.5, 0, 0)
    sim = simulate_expost(tri, 3, 10**5, seed=4)
    p = sim.wins[0].sum() / sim.samples
    assert abs(p - 0.5) <= 3 * math.sqrt(0.25 / sim.samples)
