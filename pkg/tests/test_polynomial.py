from fractions import Fraction

import numpy as np
import pytest

from errors import DimensionMismatch, NegativeExponent, PolySyntaxError
from polynomial import (SparsePoly, TruncatedSeries, compose_linear, cos_coeffs, format_poly, parse_poly,
                        sin_coeffs, sqrt1p_coeffs)


def test_zero_coefficients_are_dropped():
    P = SparsePoly(2, {(1, 0): 1, (0, 1): 0, (2, 0): Fraction(0)})
    assert P.support() == [(1, 0)]
    assert (P - P).is_zero()


def test_arithmetic_is_exact():
    x = SparsePoly.variable(2, 0)
    y = SparsePoly.variable(2, 1)
    P = (x + y) ** 2
    assert P.coefficient((1, 1)) == 2
    assert P.is_exact()
    assert P.degree() == 2 and P.min_degree() == 2
    assert (P * Fraction(1, 3)).coefficient((2, 0)) == Fraction(1, 3)


def test_parse_poly_collects_terms():
    P = parse_poly("x1^2*x2 - 1/3*x2^3 + x1^2*x2", 2)
    assert P.coefficient((2, 1)) == 2
    assert P.coefficient((0, 3)) == Fraction(-1, 3)
    assert len(P.support()) == 2


def test_parse_poly_infers_nvars():
    assert parse_poly("x3").nvars == 3
    with pytest.raises(DimensionMismatch):
        parse_poly("x3", 2)


def test_parse_errors_carry_position():
    with pytest.raises(PolySyntaxError) as info:
        parse_poly("x1 + * x2")
    assert info.value.position == 5
    with pytest.raises(NegativeExponent):
        parse_poly("x1^-2")
    with pytest.raises(PolySyntaxError):
        parse_poly("x1 + 1/0")


def test_format_poly_parses_back():
    P = parse_poly("3*x1^3 - 1/2*x1*x2^2 + x2", 2)
    assert parse_poly(format_poly(P), 2) == P


def test_evaluate_and_gradient():
    P = parse_poly("x1^2*x2 - x2^3", 2)
    pts = np.array([[1.0, 2.0], [0.5, -1.0]])
    np.testing.assert_allclose(P.evaluate(pts), [2.0 - 8.0, -0.25 + 1.0])
    dx, dy = P.gradient()
    assert dx == parse_poly("2*x1*x2", 2)
    assert dy == parse_poly("x1^2 - 3*x2^2", 2)


def test_permute_renames_variables():
    P = parse_poly("x1^2*x2", 3)
    assert P.permute([2, 0, 1]) == parse_poly("x3^2*x1", 3)


def test_truncated_series_drops_high_degree():
    x = TruncatedSeries(SparsePoly.variable(1, 0), 3)
    s = x * x * x * x
    assert s.poly.is_zero()


def test_sqrt_germ_squares_back():
    u = TruncatedSeries(SparsePoly.variable(2, 0) + SparsePoly.variable(2, 1), 5)
    root = u.compose_germ(sqrt1p_coeffs(5))
    assert root * root == u + 1


def test_sin_cos_identity():
    x = TruncatedSeries(SparsePoly.variable(1, 0), 8)
    s = x.compose_germ(sin_coeffs(8))
    c = x.compose_germ([Fraction(0)] + cos_coeffs(8)[1:]) + 1
    assert s * s + c * c == TruncatedSeries.constant(1, 1, 8)


def test_compose_linear_substitutes_rows():
    P = parse_poly("x1*x2", 2)
    Q = compose_linear(P, [[1, 1], [1, -1]])
    assert Q == parse_poly("x1^2 - x2^2", 2)
    with pytest.raises(DimensionMismatch):
        compose_linear(P, [[1, 0, 0]])
