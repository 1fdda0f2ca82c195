import json
from fractions import Fraction

import pytest

from errors import Degenerate, FaceNotFound, NotApplicable, TooLarge
from newton import (Face, NewtonLimits, adapted_check_2d, check_R_nondegenerate, face_part, newton_data, table2_suite,
                    varchenko_bound)
from phases import make_Q
from polynomial import parse_poly


@pytest.mark.parametrize("text, nvars, d_S, k_S", [
    ("x1^3", 2, Fraction(3), 1),
    ("x1^2 + x1*x2^2", 2, Fraction(4, 3), 1),
    ("x1^2*x2 - x2^3", 2, Fraction(3, 2), 1),
    ("x1*x2*x3", 3, Fraction(1), 3),
    ("x1^2*x2^5", 2, Fraction(5), 1),
    ("x1^2 + x2^2", 2, Fraction(1), 1),
])
def test_newton_distance(text, nvars, d_S, k_S):
    nd = newton_data(parse_poly(text, nvars))
    assert nd.d_S == d_S
    assert nd.k_S == k_S
    assert nd.certificate.verify(nd.d_S, nd.vertices)


def test_table2_golden_rows():
    rows = table2_suite()
    assert len(rows) == 4
    assert all(row.status == "exact match" for row in rows)


def test_constant_term_is_rejected():
    with pytest.raises(Degenerate):
        newton_data(parse_poly("1 + x1^2", 1))


def test_default_limits_cap_variables_and_terms():
    with pytest.raises(TooLarge):
        newton_data(parse_poly("x1*x2*x3*x4*x5*x6*x7", 7))
    many = " + ".join(f"x1^{i}*x2^{j}" for i in range(1, 16) for j in range(1, 16))
    with pytest.raises(TooLarge):
        newton_data(parse_poly(many, 2))
    wide = NewtonLimits(max_vars=7)
    assert newton_data(parse_poly("x1*x2*x3*x4*x5*x6*x7", 7), limits=wide).d_S == 1


def test_compact_faces_of_a_circle():
    nd = newton_data(parse_poly("x1^2 + x2^2", 2), with_faces=True)
    assert sorted(f.dim for f in nd.compact_faces) == [0, 0, 1]
    assert nd.principal_face.compact


def test_to_json_reports_bound():
    doc = json.loads(newton_data(parse_poly("x1^2*x2 - x2^3", 2)).to_json())
    assert doc['d_S'] == "3/2"
    assert doc['k_S'] == 1
    assert doc['bound'] == ["-2/3", 0]
    assert doc['certificate_verified'] is True


def test_varchenko_bound():
    assert varchenko_bound(newton_data(parse_poly("x1^2*x2 - x2^3", 2))) == (Fraction(-2, 3), 0)
    assert varchenko_bound(newton_data(parse_poly("x1*x2*x3", 3))) == (Fraction(-1), 2)


def test_face_part_of_principal_face():
    P = parse_poly("x1^2*x2 - x2^3 + x1^5", 2)
    nd = newton_data(P, with_faces=True)
    assert face_part(P, nd.principal_face, nd) == parse_poly("x1^2*x2 - x2^3", 2)


def test_face_part_of_vertex():
    P = parse_poly("x1*x2*x3", 3)
    nd = newton_data(P, with_faces=True)
    assert face_part(P, nd.principal_face, nd) == P


def test_face_part_rejects_foreign_face():
    P = parse_poly("x1^2 + x2^2", 2)
    bogus = Face(normal=(Fraction(1), Fraction(1)), support=Fraction(10), vertices=((5, 5),),
                 members=((5, 5),), rays=(), dim=0)
    with pytest.raises(FaceNotFound):
        face_part(P, bogus)


def test_nondegenerate_faces():
    verdicts = check_R_nondegenerate(parse_poly("x1*x2*x3", 3))
    assert verdicts and all(v.nondegenerate for v in verdicts)


def test_diagonal_witness():
    verdicts = check_R_nondegenerate(parse_poly("x1^2 - 2*x1*x2 + x2^2", 2))
    edge = [v for v in verdicts if v.face.dim == 1]
    assert len(edge) == 1
    assert not edge[0].nondegenerate
    x, y = edge[0].witness
    assert x == pytest.approx(y)


def test_Q41_is_nondegenerate():
    verdicts = check_R_nondegenerate(make_Q(4, 1, 2))
    assert all(v.nondegenerate for v in verdicts)


def test_adapted_coordinates():
    assert adapted_check_2d(parse_poly("x1^2*x2 - x2^3", 2)).adapted
    assert adapted_check_2d(parse_poly("x1^2 + x1*x2^2", 2)).adapted


def test_double_root_is_not_adapted():
    check = adapted_check_2d(parse_poly("x2^2 - 2*x1^2*x2 + x1^4", 2))
    assert check.max_multiplicity == 2
    assert not check.adapted


def test_adapted_check_needs_two_variables():
    with pytest.raises(NotApplicable):
        adapted_check_2d(parse_poly("x1*x2*x3", 3))
