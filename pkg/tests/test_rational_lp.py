from fractions import Fraction

import pytest

from errors import InfeasibleError, UnboundedError
from rational_lp import is_feasible, solve_lp


def test_minimum_is_exact():
    # min x + y with 3x + y ≥ 1, x + 3y ≥ 1
    res = solve_lp([1, 1], A_ub=[[-3, -1], [-1, -3]], b_ub=[-1, -1])
    assert res.value == Fraction(1, 2)
    assert res.x == [Fraction(1, 4), Fraction(1, 4)]


def test_maximize_with_equality():
    res = solve_lp([1, 2, 0], A_eq=[[1, 1, 1]], b_eq=[1], maximize=True)
    assert res.value == 2
    assert res.x[1] == 1


def test_infeasible():
    with pytest.raises(InfeasibleError):
        solve_lp([1], A_ub=[[1]], b_ub=[-1])
    assert not is_feasible(A_eq=[[1, 1]], b_eq=[-1], nvars=2)


def test_unbounded():
    with pytest.raises(UnboundedError):
        solve_lp([1, 0], A_ub=[[-1, 1]], b_ub=[0], maximize=True)


def test_feasible():
    assert is_feasible(A_ub=[[1, 1]], b_ub=[1], nvars=2)
