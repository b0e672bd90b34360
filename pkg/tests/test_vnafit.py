import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import hbar

from flipchip.errors import FlipchipError, NoResonanceError
from flipchip.synthetic import notch_trace
from flipchip.vnafit import (
    ComplexTrace,
    applied_power,
    circle_fit,
    circle_fit_algebraic,
    fit_notch,
    loaded_q,
    photon_calc,
    photon_number,
    photon_number_from_rates,
)


def test_circle_fit_exact_points():
    t = np.linspace(0, 1.5 * np.pi, 60)
    z = (0.3 - 0.2j) + 0.15 * np.exp(1j * t)
    for fitter in (circle_fit_algebraic, circle_fit):
        zc, r = fitter(z)
        assert abs(zc - (0.3 - 0.2j)) < 1e-10
        assert r == pytest.approx(0.15, rel=1e-10)


def test_noise_free_recovery():
    freqs, s21 = notch_trace(f0=5e9, q_i=5e5, q_c_mag=2e6, phi=0.0)
    fit = fit_notch((freqs, s21))
    for got, want in ((fit.f0, 5e9), (fit.q_i, 5e5), (fit.q_c_mag, 2e6), (fit.q_l, loaded_q(5e5, 2e6))):
        assert got == pytest.approx(want, rel=1e-3)
    assert abs(fit.phi) < 1e-3


def test_q_relation_invariant():
    freqs, s21 = notch_trace(phi=0.25, snr_db=40, rng=4)
    fit = fit_notch((freqs, s21))
    inv = 1 / fit.q_i + math.cos(fit.phi) / fit.q_c_mag
    assert 1 / fit.q_l == pytest.approx(inv, rel=1e-9)
    assert fit.q_l <= fit.q_i
    assert min(fit.q_l, fit.q_i, fit.q_c_mag) > 0


def test_mismatch_rotation_recovered():
    freqs, s21 = notch_trace(phi=0.3)
    assert fit_notch((freqs, s21)).phi == pytest.approx(0.3, abs=1e-6)
    # at 40 dB the single-trace phi scatter is ~0.01 rad, so judge the ensemble
    phis, qis = [], []
    for seed in range(40):
        freqs, s21 = notch_trace(phi=0.3, snr_db=40, rng=seed)
        fit = fit_notch((freqs, s21))
        phis.append(fit.phi)
        qis.append(fit.q_i)
    assert np.mean(phis) == pytest.approx(0.3, abs=0.02)
    assert np.std(phis) < 0.02
    assert np.mean(qis) == pytest.approx(5e5, rel=0.05)


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.05, max_value=20.0), st.floats(min_value=-math.pi, max_value=math.pi))
def test_amplitude_and_phase_invariance(a, alpha):
    freqs, s21 = notch_trace(phi=0.1, tau=20e-9)
    ref = fit_notch((freqs, s21))
    fit = fit_notch((freqs, a * np.exp(1j * alpha) * s21))
    for name in ("f0", "q_l", "q_c_mag", "q_i"):
        assert getattr(fit, name) == pytest.approx(getattr(ref, name), rel=1e-3)
    assert fit.background[0] == pytest.approx(a * ref.background[0], rel=1e-3)


def test_round_trip_residual_below_noise():
    freqs, s21 = notch_trace(q_c_mag=8e5, phi=0.2, a=0.8, alpha=1.1, tau=40e-9, snr_db=40, rng=7)
    fit = fit_notch((freqs, s21))
    sigma = 0.8 * 10 ** (-40 / 20)
    resid = np.sqrt(np.mean(np.abs(s21 - fit.model(freqs)) ** 2))
    assert resid == pytest.approx(fit.rms_residual)
    assert resid < 1.05 * sigma  # complex noise RMS
    # regenerated noise-free model sits inside the noise: far below the dip depth
    assert resid < 0.1 * 0.8 * fit.q_l / fit.q_c_mag


def test_no_resonance_on_flat_or_noise():
    freqs = np.linspace(4.99e9, 5.01e9, 201)
    with pytest.raises(NoResonanceError):
        fit_notch((freqs, np.full(201, 0.5 + 0.1j)))
    rng = np.random.default_rng(0)
    noise = 0.5 + 0.01 * (rng.normal(size=201) + 1j * rng.normal(size=201))
    with pytest.raises(NoResonanceError):
        fit_notch((freqs, noise))


def test_trace_validation():
    with pytest.raises(FlipchipError):
        ComplexTrace(np.arange(10.0), np.ones(10))
    with pytest.raises(FlipchipError):
        ComplexTrace(np.r_[np.arange(60.0)][::-1], np.ones(60))


def test_applied_power_examples():
    assert applied_power(0.0, 0.0) == pytest.approx(1e-3, rel=1e-15)
    assert applied_power(-30.0, 90.0) == pytest.approx(1e-15, rel=1e-12)
    assert applied_power(10.0, 10.0) == pytest.approx(1e-3, rel=1e-15)


def test_photon_number_examples():
    freqs, s21 = notch_trace(f0=5e9, q_i=5e5, q_c_mag=2e6)
    fit = fit_notch((freqs, s21))
    assert photon_number(fit, 0.0) == 0.0
    n = photon_number(fit, 1e-15)
    assert n == pytest.approx(1.54e3, rel=0.01)
    assert photon_number(fit, 2e-15) == 2 * n


@given(st.floats(min_value=1e-3, max_value=1e3))
def test_photon_number_common_scaling(lam):
    omega, kappa, gamma, p = 2 * math.pi * 6e9, 3e4, 5e4, 1e-16
    base = photon_number_from_rates(omega, kappa, gamma, p)
    assert photon_number_from_rates(omega, lam * kappa, lam * gamma, p) == pytest.approx(base / lam, rel=1e-12)


def test_photon_number_formula_and_domain():
    omega, kappa, gamma, p = 2 * math.pi * 5e9, 2e4, 6e4, 1e-15
    expected = 2 * kappa * p / (hbar * omega * (kappa + gamma) ** 2)
    assert photon_number_from_rates(omega, kappa, gamma, p) == pytest.approx(expected, rel=1e-15)
    with pytest.raises(FlipchipError):
        photon_number_from_rates(omega, 0.0, 0.0, p)


def test_photon_calc_band():
    freqs, s21 = notch_trace(f0=5e9, q_i=5e5, q_c_mag=2e6)
    fit = fit_notch((freqs, s21))
    calc = photon_calc(fit, -30.0, 90.0, band_db=3.0)
    assert calc.p_app == pytest.approx(1e-15)
    assert calc.n_int_low < calc.n_int < calc.n_int_high
    assert calc.n_int_high / calc.n_int == pytest.approx(10**0.3)
    assert calc.kappa == pytest.approx(2 * math.pi * fit.f0 / fit.q_c_mag)
    assert photon_calc(fit, -30.0, 90.0, band_db=0).n_int_low is None
