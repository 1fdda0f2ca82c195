import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from dispersion import DispersionRelation
from errors import Blowup, BoxTooSmall, BudgetExceeded, DimensionMismatch, LatticeWaveError, MeanNotZero, NotApplicable
from evolve import (DEFAULT_NORM_BOX, EvolutionState, LatticeField, apply_D, check_box, compare_with_linear,
                    default_norm_box, energy, half_wave, inv_D, inv_D_kernel_profile, linear_propagate,
                    lplq_experiment, lplq_target, memory_guard, mixed_norm, nonlinear_solve, parseval_norm,
                    small_data_exponents, propagate_state, read_field, required_side, smallness_threshold,
                    strichartz_admissible, strichartz_experiment, time_norm, write_field)
from oscquad import green_G, lattice_inv_D_kernel


@pytest.fixture
def data():
    rng = np.random.default_rng(7)
    return LatticeField.random(2, 16, rng), LatticeField.random(2, 16, rng)


def test_fields_live_on_cubes():
    with pytest.raises(DimensionMismatch):
        LatticeField(np.zeros((4, 5)))
    f = LatticeField.delta(3, 8, at=(-1, 0, 2), scale=2.0)
    assert f.at((7, 0, 2)) == 2.0
    assert f.norm(1) == 2.0
    assert f.norm(math.inf) == 2.0
    assert (f * 3).norm(2) == pytest.approx(6.0)


@pytest.mark.parametrize("mass", [0.0, 0.7])
def test_energy_is_conserved(data, mass):
    g, f = data
    before = energy(EvolutionState(g, f, 0.0), mass)
    after = linear_propagate(g, f, 7.3, mass=mass)
    assert after.energy(mass) == pytest.approx(before, rel=1e-10)


def test_zero_time_is_identity(data):
    g, f = data
    state = linear_propagate(g, f, 0.0)
    assert state.u is g and state.ut is f


def test_semigroup(data):
    g, f = data
    once = linear_propagate(g, f, 3.4)
    twice = propagate_state(propagate_state(EvolutionState(g, f, 0.0), 1.3), 2.1)
    assert twice.t == pytest.approx(3.4)
    np.testing.assert_allclose(twice.u.values, once.u.values, atol=1e-12)
    np.testing.assert_allclose(twice.ut.values, once.ut.values, atol=1e-12)


def test_half_wave_is_a_unitary_group(data):
    _, f = data
    forward = half_wave(f, 2.5)
    assert parseval_norm(forward) == pytest.approx(f.norm(2), rel=1e-12)
    np.testing.assert_allclose(half_wave(half_wave(f, 1.0), 1.5).values, forward.values, atol=1e-12)
    np.testing.assert_allclose(half_wave(forward, 2.5, sign=-1).values, f.values, atol=1e-12)
    with pytest.raises(ValueError):
        half_wave(f, 1.0, sign=2)


def test_inverse_symbol_warns_on_mean():
    with pytest.warns(MeanNotZero):
        inv_D(LatticeField.delta(2, 8))


def test_inverse_symbol_inverts_on_mean_zero_data(data):
    _, f = data
    f = LatticeField(f.values - f.values.mean())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        back = apply_D(inv_D(f))
    np.testing.assert_allclose(back.values, f.values, atol=1e-12)


def test_propagator_matches_green_function():
    t = 30.0
    L = 80
    assert L >= required_side(t)
    f = LatticeField.delta(2, L)
    u = linear_propagate(LatticeField.zeros(2, L), f, t, pointwise=True).u
    rel = DispersionRelation(2)
    for x in [(0, 0), (3, -5), (12, 12), (20, 7)]:
        assert u.at(x) == pytest.approx(green_G(rel, x, t).value, abs=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("d, t", [(2, 30.0), (3, 10.0)])
def test_propagator_matches_green_function_inside_the_cone(d, t):
    L = required_side(t)
    u = linear_propagate(LatticeField.zeros(d, L), LatticeField.delta(d, L), t, pointwise=True).u
    rel = DispersionRelation(d)
    reach = int(t) + 2
    points = np.random.default_rng(d).integers(-reach, reach + 1, size=(1000, d))
    for x in points:
        x = tuple(int(c) for c in x)
        assert u.at(x) == pytest.approx(green_G(rel, x, t).value, abs=1e-8), x


def test_small_box_is_rejected():
    with pytest.raises(BoxTooSmall) as err:
        check_box(20, 10.0)
    assert err.value.required == required_side(10.0) == 36
    f = LatticeField.delta(2, 20)
    with pytest.raises(BoxTooSmall):
        linear_propagate(LatticeField.zeros(2, 20), f, 10.0, pointwise=True)


def test_memory_guard_refuses_huge_boxes():
    pytest.importorskip("psutil")
    with pytest.raises(BudgetExceeded):
        memory_guard(4, 10000)


def test_splitting_without_nonlinearity_is_exact(data):
    g, f = data
    traj = nonlinear_solve(g, f, 3, T=2.0, dt=0.25, nonlinear=False)
    exact = linear_propagate(g, f, 2.0)
    assert traj.final.t == pytest.approx(2.0)
    np.testing.assert_allclose(traj.final.u.values, exact.u.values, atol=1e-11)
    np.testing.assert_allclose(traj.final.ut.values, exact.ut.values, atol=1e-11)


def test_keep_every(data):
    g, f = data
    traj = nonlinear_solve(g, f, 3, T=1.0, dt=0.1, nonlinear=False, keep_every=4)
    np.testing.assert_allclose(traj.times, [0.0, 0.4, 0.8, 1.0])


def test_solver_argument_checks(data):
    g, f = data
    with pytest.raises(ValueError):
        nonlinear_solve(g, f, 2, T=1.0, dt=0.1)
    with pytest.raises(ValueError):
        nonlinear_solve(g, f, 3, T=1.0, dt=0.3)


def test_blowup_is_reported():
    g = LatticeField.delta(2, 16, scale=10.0)
    with pytest.raises(Blowup) as err:
        nonlinear_solve(g, LatticeField.zeros(2, 16), 3, T=1.0, dt=0.05, cap=5.0)
    assert err.value.t == pytest.approx(0.05)
    assert err.value.sup_norm > 5.0


def test_small_data_tracks_the_linear_flow():
    f = LatticeField.delta(2, 32, scale=1e-3)
    run = compare_with_linear(f, 3, T=8.0, dt=0.1)
    assert run.times[0] >= 1.0
    assert run.max_ratio == pytest.approx(1.0, abs=1e-4)


@pytest.mark.slow
def test_fourth_power_small_data_tracks_the_linear_flow_in_d4():
    f = LatticeField.delta(4, 32, scale=1e-3)
    run = compare_with_linear(f, 4, T=40.0, dt=0.1)
    assert len(run.times) > 0
    assert run.max_ratio <= 2.0


@pytest.mark.parametrize("p, q, exponent, log_power, branch", [
    (2, 2, Fraction(0), 0, 'plancherel'),
    (1, math.inf, Fraction(3, 2), 1, 'segment'),
    (Fraction(8, 7), 4, Fraction(3, 4), 0, 'segment'),
    (Fraction(4, 3), 4, Fraction(0), 0, 'beta'),
    (1, 4, Fraction(3, 4), 0, 'beta'),
])
def test_lplq_target(p, q, exponent, log_power, branch):
    target = lplq_target(p, q)
    assert (target.exponent, target.log_power, target.branch) == (exponent, log_power, branch)


@pytest.mark.parametrize("p, q, d", [(2, 4, 4), (4, 2, 4), (1, math.inf, 3)])
def test_lplq_target_not_applicable(p, q, d):
    with pytest.raises(NotApplicable):
        lplq_target(p, q, d)


def test_lplq_plancherel_on_a_small_box():
    table = lplq_experiment(2, 2, T=10.0, f=LatticeField.delta(4, 12))
    assert table.periodic_surrogate
    assert len(table.rows) == 10
    for t, value, normalized in table.rows:
        assert value <= t + 1e-12
        assert normalized == pytest.approx(value)


def test_lplq_default_box_follows_the_light_cone():
    table = lplq_experiment(1, math.inf, T=4.0)
    assert table.L == required_side(4.0)
    assert not table.periodic_surrogate
    assert table.target.log_power == 1


def test_norm_box_is_capped():
    assert default_norm_box(4.0) == required_side(4.0) == 24
    assert default_norm_box(40.0) == DEFAULT_NORM_BOX == 48
    assert required_side(40.0) > DEFAULT_NORM_BOX


@pytest.mark.slow
def test_lplq_long_run_uses_the_periodic_surrogate():
    table = lplq_experiment(1, math.inf, T=40.0)
    assert table.L == DEFAULT_NORM_BOX
    assert table.periodic_surrogate
    assert len(table.rows) == 40


@pytest.mark.parametrize("q, r, d, expected", [
    (math.inf, math.inf, 4, True),
    (4, math.inf, 4, True),
    (4, 4, 4, True),
    (4, 4, 3, True),
    (3, 4, 3, False),
    (2, 4, 4, False),
    (1, math.inf, 4, False),
])
def test_strichartz_admissible(q, r, d, expected):
    assert strichartz_admissible(q, r, d) is expected


def test_strichartz_experiment():
    report = strichartz_experiment(math.inf, math.inf, d=3, count=3, T=4.0, dt=0.5, L=16, support=2)
    assert len(report.ratios) == 3
    assert np.all(report.ratios > 0)
    assert report.constant == max(report.ratios)
    assert report.data_index == Fraction(6, 5)
    with pytest.raises(NotApplicable):
        strichartz_experiment(2, 4, d=4, count=1, T=1.0, L=8)


def test_preset():
    assert small_data_exponents(3) == (Fraction(7, 6), Fraction(7, 2), Fraction(9, 14))
    with pytest.raises(ValueError):
        small_data_exponents(2)


def test_time_norm():
    times = np.linspace(0, 4, 9)
    assert time_norm(times, np.full(9, 2.0), 2) == pytest.approx(4.0)
    assert time_norm(times, np.arange(9.0), math.inf) == 8.0


def test_mixed_norm_nesting(data):
    g, f = data
    traj = nonlinear_solve(g, f, 3, T=1.0, dt=0.25, nonlinear=False)
    report = mixed_norm(traj, 2, 2, inputs={'f': f.norm(2)})
    assert report.nested
    assert len(report.snapshot_norms) == len(traj)
    assert report.input_norms['f'] == f.norm(2)


def test_field_file_roundtrip(tmp_path, data):
    g, _ = data
    path = tmp_path / "g.lwf"
    write_field(str(path), g)
    np.testing.assert_array_equal(read_field(str(path)).values, g.values)
    wave = half_wave(g, 1.0)
    write_field(str(path), wave)
    assert read_field(str(path)).is_complex


def test_field_file_rejects_foreign_data(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"\x00" * 64)
    with pytest.raises(LatticeWaveError):
        read_field(str(path))


def test_kernel_profile_matches_the_lattice_kernel():
    profile = inv_D_kernel_profile(3, 32)
    k0 = lattice_inv_D_kernel((0, 0, 0))
    for x in [(1, 0, 0), (2, 1, 0), (1, 1, 1)]:
        assert profile.at((0, 0, 0)) - profile.at(x) == pytest.approx(k0 - lattice_inv_D_kernel(x), abs=1e-3)


@pytest.mark.slow
def test_smallness_threshold():
    lo, hi = 1e-6, 10.0
    profile = LatticeField.delta(2, 24)
    threshold = smallness_threshold(3, profile, T=4.0, dt=0.1, lo=lo, hi=hi, iterations=8)
    assert lo < threshold <= hi
