import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import jv

from decayfit import DecaySamples, fit_decay, geometric_schedule
from dispersion import DispersionRelation
from errors import BudgetExceeded, NotApplicable, TooLarge
from oscquad import (AmplitudeSpec, bessel_series, bump, cosine_kernel, flat_bump, green_G, lattice_inv_D_kernel,
                     model_phase_catalog, oscint_I, oscint_J, perturbation_probe, quad_torus, torus_partition)
from polynomial import SparsePoly, parse_poly


def test_bump_and_partition():
    assert bump(0.0) == 1.0
    assert bump(1.0) == 0.0
    s = np.linspace(-math.pi, math.pi, 101)
    total = torus_partition(s - 2 * math.pi) + torus_partition(s) + torus_partition(s + 2 * math.pi)
    np.testing.assert_allclose(total, 1.0, atol=1e-14)
    np.testing.assert_array_equal(torus_partition(np.linspace(-math.pi / 2, math.pi / 2, 11)), 1.0)


def test_flat_bump_is_flat_to_third_order():
    s = np.array([1e-2, 5e-2, 0.1])
    np.testing.assert_allclose(1.0 - flat_bump(s), s ** 4, rtol=1e-2)
    assert flat_bump(1.0) == 0.0
    amp = AmplitudeSpec('flat-separable', radius=2.0)
    assert amp.separable
    assert amp([[0.4, -1.0]])[0] == pytest.approx(float(flat_bump(0.2) * flat_bump(-0.5)))


def test_amplitude_validation():
    with pytest.raises(ValueError):
        AmplitudeSpec('gaussian')
    with pytest.raises(ValueError):
        AmplitudeSpec('separable', radius=0.0)
    with pytest.raises(ValueError):
        AmplitudeSpec('origin-cutoff', radius=0.5, inner=0.5)
    with pytest.raises(NotApplicable):
        AmplitudeSpec('compact-bump').profile(0.1)


def test_quad_torus_is_exact_on_trigonometric_polynomials():
    assert quad_torus(lambda p: np.ones(len(p)), 2, 8) == pytest.approx((2 * math.pi) ** 2)
    symbol = quad_torus(lambda p: np.sum(2 - 2 * np.cos(p), axis=-1), 4, 8)
    assert symbol == pytest.approx(8 * (2 * math.pi) ** 4)
    wave = quad_torus(lambda p: np.exp(1j * (3 * p[:, 0] - p[:, 1])), 2, 16)
    assert abs(wave) < 1e-12


def test_quad_torus_guards():
    with pytest.raises(ValueError):
        quad_torus(lambda p: np.ones(len(p)), 1, 2)
    with pytest.raises(BudgetExceeded):
        quad_torus(lambda p: np.ones(len(p)), 4, 64, budget=1e6)


def test_green_function_vanishes_at_time_zero():
    assert green_G(DispersionRelation(2), (3, 1), 0.0).value == 0.0


def test_green_function_short_time_series():
    # G(0, t) = t − E[ω²] t³/3! + E[ω⁴] t⁵/5! − …, with E[ω²] = 4 and E[ω⁴] = 20 for d = 2
    t = 0.1
    value = green_G(DispersionRelation(2), (0, 0), t).value
    assert value == pytest.approx(t - 4 * t ** 3 / 6 + 20 * t ** 5 / 120, abs=1e-8)


def test_green_function_symmetry():
    rel = DispersionRelation(3)
    base = green_G(rel, (4, -1, 2), 6.0).value
    for x in [(-1, 2, 4), (2, 4, 1), (-4, 1, -2)]:
        assert green_G(rel, x, 6.0).value == pytest.approx(base, abs=1e-12)


@pytest.mark.parametrize("x", [0, 1, 3, 7])
def test_cosine_kernel_is_bessel(x):
    t = 3.7
    assert cosine_kernel(x, t) == pytest.approx(jv(2 * x, 2 * t), abs=1e-10)
    assert bessel_series(2 * x, 2 * t) == pytest.approx(jv(2 * x, 2 * t), abs=1e-13)


def test_bessel_series_negative_order():
    assert bessel_series(-3, 2.5) == pytest.approx(-jv(3, 2.5), abs=1e-14)
    assert bessel_series(-4, 2.5) == pytest.approx(jv(4, 2.5), abs=1e-14)


def test_inverse_symbol_kernel():
    k0 = lattice_inv_D_kernel((0, 0, 0))
    k1 = lattice_inv_D_kernel((1, 0, 0))
    assert k0 > k1 > 0
    assert lattice_inv_D_kernel((3, 1, 0)) == pytest.approx(lattice_inv_D_kernel((0, -1, 3)), rel=1e-12)
    with pytest.raises(NotApplicable):
        lattice_inv_D_kernel((2,))


def test_J_of_a_linear_phase_is_the_amplitude_transform():
    t = 6.0
    expected, _ = quad(lambda s: float(bump(s)), -1, 1, weight='cos', wvar=t)
    res = oscint_J(parse_poly("x1", 1), t=t)
    assert res.value.real == pytest.approx(expected, abs=1e-8)
    assert abs(res.value.imag) < 1e-10


def test_J_with_the_flat_amplitude():
    t = 6.0
    expected, _ = quad(lambda s: float(flat_bump(s)), -1, 1, weight='cos', wvar=t)
    res = oscint_J(parse_poly("x1", 1), AmplitudeSpec('flat-separable'), t=t)
    assert res.value.real == pytest.approx(expected, abs=1e-8)


def test_J_factorizes_over_independent_variables():
    t = 9.0
    single = oscint_J(parse_poly("x1^2", 1), t=t).value
    double = oscint_J(parse_poly("x1^2 + x2^2", 2), t=t)
    assert double.value == pytest.approx(single ** 2, abs=1e-9)
    assert len(double.parts) == 2


def test_J_factors_out_the_constant_term():
    t = 5.0
    plain = oscint_J(parse_poly("x1^2", 1), t=t).value
    shifted = oscint_J(parse_poly("x1^2 + 3", 1), t=t).value
    assert shifted == pytest.approx(np.exp(3j * t) * plain, abs=1e-9)


def test_J_affine_collapse_matches_brute_force():
    t = 5.0
    nodes = np.linspace(-1, 1, 1201)
    h = nodes[1] - nodes[0]
    X, Y = np.meshgrid(nodes, nodes, indexing='ij')
    brute = np.sum(bump(X) * bump(Y) * np.exp(1j * t * X ** 2 * Y)) * h * h
    res = oscint_J(parse_poly("x1^2*x2", 2), t=t)
    assert res.value == pytest.approx(complex(brute), abs=1e-7)


def test_J_rejects_five_variables():
    with pytest.raises(TooLarge):
        oscint_J(parse_poly("x1*x2*x3*x4*x5", 5))


def test_I_does_not_depend_on_the_cutoff():
    rel = DispersionRelation(2)
    v, t = [0.3, 0.1], 4.0
    narrow = oscint_I(rel, v, t)
    wide = oscint_I(rel, v, t, cutoff=AmplitudeSpec('origin-cutoff', radius=1.0, inner=0.5))
    assert narrow.value == pytest.approx(wide.value, abs=1e-6)
    assert narrow.value == pytest.approx(narrow.parts['I1'] + narrow.parts['I2'])


@pytest.mark.parametrize("rel, cutoff", [
    (DispersionRelation(1), None),
    (DispersionRelation(2, mass=1.0), None),
    (DispersionRelation(2), AmplitudeSpec('origin-cutoff', radius=2.0, inner=0.5)),
    (DispersionRelation(2), AmplitudeSpec('compact-bump', radius=1.0)),
])
def test_I_not_applicable(rel, cutoff):
    with pytest.raises(NotApplicable):
        oscint_I(rel, [0.1] * rel.d, 1.0, cutoff=cutoff)


def test_model_catalog():
    catalog = model_phase_catalog()
    assert len(catalog) == 8
    assert all(isinstance(m.poly, SparsePoly) for m in catalog)
    by_name = {m.name: m.expected for m in catalog}
    assert by_name["x1*x2*x3"][1] == 1


def test_probe_without_perturbation():
    P = parse_poly("x1^3", 1)
    ts = [4.0, 8.0]
    probe = perturbation_probe(P, 0.0, 3, ts)
    for row in probe.magnitudes:
        np.testing.assert_allclose(row, probe.magnitudes[0])
    assert probe.envelope(0.0)[0] == pytest.approx(abs(oscint_J(P, t=4.0).value))


def test_probe_envelope_grows_with_eps():
    probe = perturbation_probe(parse_poly("x1^3", 1), 0.2, 6, [10.0, 20.0], seed=3)
    assert np.all(probe.envelope(0.05) <= probe.envelope(0.2))
    with pytest.raises(ValueError):
        perturbation_probe(parse_poly("x1^3", 1), -0.1, 2, [1.0])


@pytest.mark.slow
def test_perturbed_envelope_of_a_split_phase():
    t_values = geometric_schedule(10.0, 100.0)
    probe = perturbation_probe(parse_poly("x1*x2*x3 + x4^2", 4), 0.05, 100, t_values,
                               AmplitudeSpec('flat-separable'), seed=11, rtol=1e-6)
    base, env = probe.magnitudes[0], probe.envelope()
    assert np.all(env <= 3.0 * base)
    fit = fit_decay(DecaySamples(t_values, env, 'split phase'), t_min=10.0, target_p=1, model='logpoly')
    assert fit.beta <= -1.4
