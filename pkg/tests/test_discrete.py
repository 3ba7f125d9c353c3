import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from mechlab import InvalidInputError, ResourceError
from mechlab import discrete as dm
from mechlab.lp import solve
from mechlab.priors import DiscretePrior, separation_prior


def table1(i, j):
    """Rows of the published table are v2, columns v1; entries 0 mean 'seller'."""
    layout = {(0, 0): j, (0, 1): 0, (0, 2): 2,
              (1, 0): 0, (1, 1): j, (1, 2): 2,
              (2, 0): 1, (2, 1): 1, (2, 2): i}
    return dm.AllocationTable.from_function(2, 3, lambda p: layout[p])


@pytest.fixture(scope="module")
def prior():
    return separation_prior(exact=True)


def test_interim_of_table1(prior):
    t = table1(2, 1)
    assert dm.interim_alloc_discrete(prior, t, 1) == [F(1, 20), F(3, 20), F(1, 5)]
    assert dm.interim_alloc_discrete(prior, t, 2) == [0, 0, 1]
    assert dm.interim_alloc_discrete(prior, dm.seller_keeps_table(2, 3), 1) == [0, 0, 0]


def test_bic_monotonicity():
    assert dm.is_bic_alloc([F("0.05"), F("0.15"), F("0.2")])
    assert not dm.is_bic_alloc([F("0.05"), 0, F("0.2")])
    assert dm.is_bic_alloc([0, 0, 0])


def test_payments_exact(prior):
    assert dm.optimal_bic_payments(prior, [F("0.05"), F("0.15"), F("0.2")]) == [F("0.05"), F("1.05"), F("6.05")]
    assert dm.optimal_bic_payments(prior, [0, 0, 1]) == [0, 0, 100]
    assert dm.optimal_bic_payments(prior, [0, 0, 0]) == [0, 0, 0]
    with pytest.raises(InvalidInputError):
        dm.optimal_bic_payments(prior, [F("0.1"), 0, 1])


def test_dsic_classification(prior):
    assert not dm.is_dsic(table1(2, 1))
    assert dm.is_dsic(dm.efficient_table(2, 3))
    assert dm.is_dsic(dm.seller_keeps_table(2, 3))


def test_rev_wel(prior):
    mech = dm.classify(prior, table1(2, 1))
    assert (mech.rev, mech.wel) == (85, F("96.2275"))
    keep = dm.classify(prior, dm.seller_keeps_table(2, 3))
    assert (keep.rev, keep.wel) == (0, 0)
    free = dm.AllocationTable.from_function(2, 3, lambda p: 1)
    x = dm.interim_all(prior, free)
    expected = F("0.8") * 100 + F("0.15") * 10 + F("0.05") * 1
    assert dm.rev_wel(prior, x, [[0] * 3] * 2) == (0, expected)


def test_efficient_welfare_is_expected_max(prior):
    mech = dm.classify(prior, dm.efficient_table(2, 3))
    direct = sum(prior.probs[a] * prior.probs[b] * max(prior.values[a], prior.values[b])
                 for a, b in itertools.product(range(3), repeat=2))
    assert mech.wel == direct


@pytest.fixture(scope="module")
def frontiers(prior):
    return dm.enumerate_pareto(prior, 2, "bic"), dm.enumerate_pareto(prior, 2, "dsic")


def test_separation_point(frontiers):
    bic, dsic = frontiers
    hit = [p for p in bic if (p.wel, p.rev) == (F("96.2275"), 85)]
    assert len(hit) == 1
    assert sorted(hit[0].witnesses) == sorted(table1(i, j).index for i in (1, 2) for j in (1, 2))
    assert all((p.wel, p.rev) != (F("96.2275"), 85) for p in dsic)


def test_frontier_is_antichain(frontiers):
    for front in frontiers:
        for a, b in itertools.permutations(front, 2):
            assert not (a.wel >= b.wel and a.rev >= b.rev)


def test_dsic_implies_bic_everywhere(prior):
    setup = dm._Setup(prior, 2)
    bic_ok, dsic_ok, _, _ = setup.run(0, 3 ** 9)
    assert not (dsic_ok & ~bic_ok).any()


@given(st.integers(0, 3 ** 9 - 1))
def test_ex_ante_allocation_at_most_one(index):
    prior = separation_prior(exact=True)
    t = dm.AllocationTable.from_index(index, 2, 3)
    x = dm.interim_all(prior, t)
    assert sum(p * xk for xi in x for p, xk in zip(prior.probs, xi)) <= 1
    assert dm.AllocationTable.from_index(t.index, 2, 3) == t


@given(st.integers(0, 3 ** 9 - 1))
def test_payment_closed_form_matches_lp(index):
    prior = separation_prior(exact=True)
    for xi in dm.interim_all(prior, dm.AllocationTable.from_index(index, 2, 3)):
        if dm.is_bic_alloc(xi):
            assert dm.optimal_bic_payments(prior, xi) == dm.lp_bic_payments(prior, xi)


def test_single_buyer_single_type():
    prior = DiscretePrior([10], [1])
    assert dm.attainable_points(prior, 1) == [(0, 0), (10, 10)]
    front = dm.enumerate_pareto(prior, 1)
    assert [(p.wel, p.rev) for p in front] == [(10, 10)]


def test_float_mode_matches_rational(frontiers):
    flt = dm.enumerate_pareto(separation_prior(exact=False), 2, "bic")
    ex = frontiers[0]
    assert len(flt) == len(ex)
    for a, b in zip(flt, ex):
        assert a.wel == pytest.approx(float(b.wel), abs=1e-9)
        assert a.rev == pytest.approx(float(b.rev), abs=1e-9)
        assert a.witnesses == b.witnesses


def test_cap():
    with pytest.raises(ResourceError) as e:
        dm.enumerate_pareto(separation_prior(), 3, cap=10**6)
    assert e.value.required == 4 ** 27


def test_threads_do_not_change_result(prior, frontiers):
    par = dm.enumerate_pareto(prior, 2, "bic", threads=4, chunk=1000)
    assert [(p.wel, p.rev, p.witnesses) for p in par] == [(p.wel, p.rev, p.witnesses) for p in frontiers[0]]


def test_payment_interval_contains_optimum(prior):
    x = dm.interim_all(prior, table1(2, 1))
    lo, hi = dm.payment_revenue_interval(prior, x)
    assert lo <= 85 == hi
