from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mechlab import DomainError, InvalidInputError
from mechlab import priors as pr


def test_quantile_values():
    assert pr.quantile_value(pr.uniform(), 0.5) == pytest.approx(0.5)
    assert pr.quantile_value(pr.powerlaw(1.0), 0.5) == pytest.approx(2.0)
    assert pr.quantile_value(pr.table([0, 1], [0, 1]), 0.25) == pytest.approx(0.25)


def test_quantile_value_domain():
    with pytest.raises(DomainError):
        pr.quantile_value(pr.powerlaw(1.0), 1.0)
    with pytest.raises(DomainError):
        pr.quantile_value(pr.uniform(), -0.1)


def test_virtual_values():
    assert pr.virtual_value_q(pr.uniform(), 0.25) == pytest.approx(-0.5)
    assert pr.virtual_value_q(pr.uniform(), 1.0) == pytest.approx(1.0)
    for q in (0.0, 0.3, 0.9):
        assert pr.virtual_value_q(pr.powerlaw(1.0), q) == pytest.approx(0.0, abs=1e-12)


def test_condition1():
    assert pr.check_condition1(pr.uniform(), 64).holds
    assert pr.check_condition1(pr.powerlaw(1.0), 64).holds
    rep = pr.check_condition1(pr.powerlaw(2.0), 64)
    assert not rep.holds and rep.worst_margin < 0


def test_regularity():
    assert pr.check_regular(pr.uniform(), 64)
    assert pr.check_regular(pr.powerlaw(1.0), 64)
    # flat stretch then a steep one: phi = v - (1-q) v' drops where the slope jumps
    q = np.array([0.0, 0.5, 0.7, 1.0])
    v = np.array([0.0, 0.5, 0.52, 1.42])
    assert not pr.check_regular(pr.table(q, v), 200)


@pytest.mark.parametrize("size", [16, 33, 128])
def test_condition1_any_grid(size):
    assert pr.check_condition1(pr.uniform(), size).holds
    for a in (0.5, 1.0):
        assert pr.check_condition1(pr.powerlaw(a), size).holds


@given(st.sampled_from(["uniform", "p1", "p05", "p3"]), st.integers(16, 300))
def test_value_monotone_and_phi_below_v(kind, size):
    m = {"uniform": pr.uniform(), "p1": pr.powerlaw(1.0), "p05": pr.powerlaw(0.5), "p3": pr.powerlaw(3.0)}[kind]
    q = m.default_grid(size)
    v = m.value(q)
    assert np.all(np.diff(v) >= 0)
    assert np.all(m.virtual(q) <= v + 1e-12)


# the truncation constant v'''/(6 v') of this model stays below 10 on [0, 0.6]
@given(st.floats(0.05, 0.6))
def test_tabulated_derivative_matches_closed_form(q0):
    ref = pr.powerlaw(2.0)
    grid = np.linspace(0, 0.99, 2001)
    tab = pr.table(grid, ref.value(grid), h=1e-3, interp="cubic")
    h = tab.h
    assert abs(tab.dvalue(q0) - ref.dvalue(q0)) <= 10 * h * h * abs(ref.dvalue(q0)) + 1e-6


def test_discrete_prior_validation():
    p = pr.DiscretePrior([1, 10, 100], ["0.05", "0.15", "0.8"])
    assert p.probs[0] == Fraction(1, 20) and p.m == 3
    with pytest.raises(InvalidInputError):
        pr.DiscretePrior([1, 1, 2], [0.2, 0.3, 0.5])
    with pytest.raises(InvalidInputError):
        pr.DiscretePrior([1, 2], [0.5, 0.6])


def test_config_round_trip():
    for m in (pr.uniform(), pr.powerlaw(1.5)):
        back = pr.model_from_config(m.to_config())
        assert back.to_config() == m.to_config()
    with pytest.raises(InvalidInputError, match="alpha"):
        pr.model_from_config({"kind": "powerlaw"})
