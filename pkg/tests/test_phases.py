import math
from fractions import Fraction

import numpy as np
import pytest

from dispersion import DispersionRelation
from errors import NotApplicable, NotCritical
from phases import (ALPHA_STAR, Weight, build_conj_phase, d4_sigma2_form, is_in_H, most_degenerate_form,
                    make_Q, make_T1, make_Y, taylor_phase, weight_wd, weighted_min_degree)
from polynomial import SparsePoly, parse_poly

HALF_PI = math.pi / 2


def test_weight_wd():
    assert weight_wd(3).alpha == (Fraction(1, 3), Fraction(1, 3), Fraction(1, 2))
    with pytest.raises(ValueError):
        Weight((Fraction(0), Fraction(1)))


def test_make_Q():
    assert make_Q(1, 1, 2) == parse_poly("3*x1^2*x2 + 3*x1*x2^2", 2)


def test_make_Y_support():
    Y = make_Y(1)
    assert Y == parse_poly("3*x1^3 - 3*x1*x2^2", 2)


def test_make_T1():
    assert make_T1(1) == parse_poly("x3*x1^2", 3)


def test_cubic_is_on_the_boundary_of_H():
    Q = make_Q(1, 1, 3)
    alpha = Weight((Fraction(1, 3),) * 3)
    assert weighted_min_degree(Q, alpha) == 1
    assert not is_in_H(Q, alpha)


def test_zero_polynomial_is_in_every_H():
    assert weighted_min_degree(SparsePoly(2), weight_wd(2)) == float('inf')
    assert is_in_H(SparsePoly(2), weight_wd(2))


@pytest.mark.parametrize("xi0", [(HALF_PI, HALF_PI), (1.0, 2.0), (HALF_PI, math.pi / 3)])
def test_series_matches_phase(xi0):
    rel = DispersionRelation(2)
    ps = taylor_phase(rel, xi0)
    y = np.array([[0.004, -0.005], [-0.003, 0.002]])
    v0 = rel.grad(np.asarray(xi0))
    np.testing.assert_allclose(ps.evaluate(y), rel.phase(v0, np.asarray(xi0) + y), rtol=0, atol=1e-12)
    np.testing.assert_allclose(ps.hessian(), -rel.hess(np.asarray(xi0)), atol=1e-12)


def test_quarter_turn_points_are_exact():
    ps = taylor_phase(DispersionRelation(3), [HALF_PI] * 3)
    assert ps.exact
    assert ps.omega0_sq == 6
    assert ps.series.homogeneous_part(1).is_zero()


def test_wrong_velocity_is_not_critical():
    with pytest.raises(NotCritical):
        taylor_phase(DispersionRelation(2), [HALF_PI, HALF_PI], v0=[0.5, 0.4])


@pytest.mark.parametrize("d", [3, 4, 5])
def test_most_degenerate_remainder(d):
    form = most_degenerate_form(d)
    assert form.a != 0 and form.b != 0
    assert form.remainder_in_H
    lam, lam_d = form.normalizing_scales()
    assert form.phase.omega0 * float(form.a) * lam_d ** 2 == pytest.approx(1.0)
    assert form.phase.omega0 * float(form.b) * lam ** 3 == pytest.approx(1.0)


def test_most_degenerate_needs_d3():
    with pytest.raises(NotApplicable):
        most_degenerate_form(2)


def test_d4_sigma2_kernel_and_cubic():
    form = d4_sigma2_form(1.0)
    assert form.kernel_residual <= 1e-10
    assert form.is_d4_minus
    assert form.remainder_in_H
    assert len(ALPHA_STAR) == 4


def test_conj_phase_d3():
    phase = build_conj_phase(3)
    assert phase.newton.d_S == Fraction(6, 7)
    assert phase.newton.k_S == 1
    assert phase.newton.varchenko == (Fraction(-7, 6), 0)
    assert phase.principal_matches
    assert all(phase.containments.values())
    assert phase.verified


@pytest.mark.slow
def test_conj_phase_d5():
    phase = build_conj_phase(5)
    assert phase.newton.d_S == Fraction(6, 11)
    assert phase.newton.k_S == 1
    assert phase.verified


def test_conj_phase_needs_odd_d():
    with pytest.raises(NotApplicable):
        build_conj_phase(4)
