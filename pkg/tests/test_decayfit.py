import math
from fractions import Fraction

import numpy as np
import pytest

from decayfit import (FREQUENCY_GAP, RESOLUTION, DecayFit, DecaySamples, _judge, demodulate, fit_decay, fit_family,
                      geometric_schedule, ray_frequencies, run_conj_suite, run_kernel_decay, run_model_phase_suite,
                      run_table1_suite)
from dispersion import stratum_rays
from errors import InsufficientRange


def _fit(beta, p=0):
    return DecayFit(beta, p, 0.0, {p: 0.0}, {p: beta}, {p: 0.0})


def test_power_with_log_factor():
    t = geometric_schedule(10.0, 1000.0)
    fit = fit_decay(DecaySamples(t, 2.0 * t ** -1.5 * np.log(t)))
    assert fit.p == 1
    assert fit.resolved
    assert fit.beta == pytest.approx(-1.5, abs=1e-9)
    assert fit.logC == pytest.approx(math.log(2.0), abs=1e-9)


def test_pure_power():
    t = geometric_schedule(10.0, 200.0)
    fit = fit_decay(DecaySamples(t, 3.0 * t ** -0.75))
    assert fit.p == 0
    assert fit.beta == pytest.approx(-0.75, abs=1e-9)
    assert set(fit.residuals) == {0, 1, 2}


def test_early_samples_are_dropped():
    t = geometric_schedule(1.0, 400.0)
    m = np.where(t < 8.0, 1.0, t ** -2.0)
    assert fit_decay(DecaySamples(t, m)).beta == pytest.approx(-2.0, abs=1e-9)


def test_insufficient_range():
    with pytest.raises(InsufficientRange):
        fit_decay(DecaySamples(np.linspace(10, 100, 5), np.ones(5)))
    with pytest.raises(InsufficientRange):
        fit_decay(DecaySamples(np.linspace(10, 20, 12), np.ones(12)))


@pytest.mark.parametrize("t, m", [
    ([1.0, 2.0], [1.0]),
    ([2.0, 1.0], [1.0, 1.0]),
    ([0.0, 1.0], [1.0, 1.0]),
    ([1.0, 2.0], [1.0, -1.0]),
])
def test_sample_validation(t, m):
    with pytest.raises(ValueError):
        DecaySamples(t, m)


def test_envelope_is_a_running_maximum():
    samples = DecaySamples(np.arange(1.0, 10.0), [0, 3, 0, 0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(samples.envelope(5).magnitude, [3, 3, 3, 3, 0, 0, 0, 0, 0])
    assert len(samples.thin(2)) == 5


def test_geometric_schedule():
    t = geometric_schedule(10.0, 200.0, 1.15)
    assert t[0] == pytest.approx(10.0)
    assert t[-1] == pytest.approx(200.0)
    assert np.all(t[1:] / t[:-1] <= 1.15 + 1e-12)


def test_judge():
    assert _judge(_fit(-0.7), (Fraction(-3, 4), 0), 0.1)
    assert not _judge(_fit(-0.7, p=1), (Fraction(-3, 4), 0), 0.1)
    assert not _judge(_fit(-0.5), (Fraction(-7, 6), 0), 0.1, upper_only=True)
    assert _judge(_fit(-1.3), (Fraction(-7, 6), 0), 0.1, upper_only=True)


def test_judge_needs_a_resolved_log_power():
    fallback = DecayFit(-1.0, 1, 0.0, {0: 1.5e-3, 1: 1e-3}, {0: -0.9, 1: -1.0}, {0: 0.0, 1: 0.0}, resolved=False)
    assert not _judge(fallback, (Fraction(-1), 1), 0.05)
    assert _judge(_fit(-1.0, p=1), (Fraction(-1), 1), 0.05)


def test_logpoly_absorbs_a_lower_log_term():
    t = geometric_schedule(20.0, 200.0)
    fit = fit_decay(DecaySamples(t, t ** -1.0 * (2.0 * np.log(t) - 3.0)), target_p=1, model='logpoly')
    assert fit.p == 1
    assert fit.resolved
    assert fit.beta == pytest.approx(-1.0, abs=1e-4)
    assert fit.logC == pytest.approx(math.log(2.0), abs=1e-3)
    assert fit.residuals[0] > 10 * RESOLUTION


def test_logpoly_on_a_complex_log_amplitude():
    t = geometric_schedule(20.0, 200.0)
    m = t ** -0.5 * np.abs((1 + 1j) * np.log(t) + (2 - 1j))
    fit = fit_decay(DecaySamples(t, m), model='logpoly')
    assert fit.p == 1
    assert fit.resolved
    assert fit.beta == pytest.approx(-0.5, abs=1e-4)


def test_logpoly_keeps_a_pure_power():
    t = geometric_schedule(20.0, 200.0)
    fit = fit_decay(DecaySamples(t, 3.0 * t ** -0.75 * (1.0 + 0.1 / t)), target_p=1, model='logpoly')
    assert fit.p == 0
    assert fit.resolved
    assert fit.beta == pytest.approx(-0.75, abs=0.01)


def test_residuals_below_resolution_tie():
    t = geometric_schedule(20.0, 200.0, 1.05)
    m = t ** -0.75 * (1.0 + 5e-4 * np.cos(3.0 * t))
    fit = fit_decay(DecaySamples(t, m), target_p=1, model='logpoly')
    assert max(fit.residuals.values()) < RESOLUTION
    assert fit.p == 0
    assert fit.resolved
    assert fit.beta == pytest.approx(-0.75, abs=0.01)


def test_unknown_fit_model():
    t = geometric_schedule(10.0, 200.0)
    with pytest.raises(ValueError):
        fit_decay(DecaySamples(t, t ** -1.0), model='spline')
    assert fit_family(0) == 'loglog'
    assert fit_family(1) == 'logpoly'


def test_demodulate_recovers_the_oscillating_amplitude():
    theta, centre = math.pi - 4.0, 45
    ms = np.arange(centre - 6, centre + 7)
    delta = (ms - centre) / centre
    values = (0.3 * (1 + 0.2 * delta) * np.cos(ms * theta + 0.7) + 0.05 * (1 - 0.3 * delta)
              + 0.02 * np.cos(1.9 * ms - 0.4))
    assert demodulate(ms, values, centre, [theta, 1.9]) == pytest.approx(0.3, abs=1e-10)
    assert demodulate(ms, values - 0.05, centre, [theta, 1.9]) == pytest.approx(0.3, abs=1e-10)


def test_ray_frequencies_lead_with_the_ray_phase():
    ray = next(r for r in stratum_rays(2) if r.direction == (1, 1))
    assert ray.phase_step == pytest.approx(math.pi - 4.0, abs=1e-9)
    freqs = ray_frequencies(ray)
    assert freqs[0] == ray.phase_step
    for i, a in enumerate(freqs):
        for b in freqs[i + 1:]:
            assert abs(np.angle(np.exp(1j * (a - b)))) > FREQUENCY_GAP
            assert abs(np.angle(np.exp(1j * (a + b)))) > FREQUENCY_GAP


@pytest.mark.slow
@pytest.mark.parametrize("d", [2, 3])
def test_kernel_decay(d):
    row = run_kernel_decay(d)
    assert row.fit.p == 0
    assert row.passed


@pytest.mark.slow
def test_model_suite():
    rows = {row.name: row for row in run_model_phase_suite()}
    assert len(rows) == 8
    for name, row in rows.items():
        assert row.passed, f"{name}: β={row.fit.beta:.3f}, p={row.fit.p}, {row.fit.note}"
    assert rows["x1*x2*x3"].fit.p == 1
    assert rows["x1*x2*x3"].fit.resolved


@pytest.mark.slow
def test_table1_rays_d2():
    rows = run_table1_suite(2)
    assert len(rows) == len(stratum_rays(2))
    for row in rows:
        assert row.extra['demodulated']
        assert row.passed, f"{row.name}: β={row.fit.beta:.3f} against {row.target}"


@pytest.mark.slow
def test_conj_suite_d3():
    row = run_conj_suite(3)
    assert row.extra['d_S'] == Fraction(6, 7)
    assert row.extra['verified']
    assert row.fit.beta < 0
