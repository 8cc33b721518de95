from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import hbar

from pseudo2d.resonator import (
    FitError,
    ResonatorFit,
    S21Trace,
    avg_photon_number,
    crosstalk_spectrum,
    dip_trace,
    fit_resonance,
    model_s21,
    notch_s21,
    read_trace,
    synthetic_trace,
)

F_R = 10.1326e9
QC = 3.141e5
QI = 2.3e4


def loaded_q(qi, qc, phi=0.0):
    return 1.0 / (1.0 / qi + math.cos(phi) / qc)


def sweep(f_r, q_l, points=801, linewidths=10):
    half = linewidths * f_r / q_l
    return np.linspace(f_r - half, f_r + half, points)


def make_fit(**kw):
    base = dict(f_r=F_R, Q_l=loaded_q(QI, QC), Q_c_mag=QC, phi=0.0, Q_i=QI, tau=0.0, a=1.0, alpha=0.0, residual=0.0)
    base.update(kw)
    return ResonatorFit(**base)


# --- model -----------------------------------------------------------------

def test_model_on_resonance():
    fit = make_fit()
    assert model_s21(np.array([F_R]), fit)[0] == pytest.approx(1 - fit.Q_l / QC)


def test_model_far_detuned_is_baseline():
    fit = make_fit(a=0.8, alpha=0.3)
    far = model_s21(np.array([F_R * 0.5, F_R * 1.5]), fit)
    assert np.allclose(np.abs(far), 0.8, rtol=1e-4)


def test_model_decoupled_limit():
    f = np.linspace(F_R - 1e6, F_R + 1e6, 5)
    s = notch_s21(f, F_R, 1e4, 1e300, 0.2, 0.9, 0.4, 3e-9)
    assert np.allclose(s, 0.9 * np.exp(0.4j) * np.exp(-2j * np.pi * f * 3e-9))


def test_model_rejects_nonpositive_frequency():
    with pytest.raises(ValueError):
        notch_s21(np.array([1.0]), 0.0, 1e4, 1e5, 0.0)


# --- trace validation --------------------------------------------------------

def test_trace_validation():
    f = np.linspace(1e9, 2e9, 20)
    with pytest.raises(ValueError):
        S21Trace(f[:10], np.ones(10))
    with pytest.raises(ValueError):
        S21Trace(f[::-1], np.ones(20))
    with pytest.raises(ValueError):
        S21Trace(f, np.ones(19))


def test_read_trace_reports_line_numbers(tmp_path):
    path = tmp_path / "t.csv"
    rows = ["frequency_hz,s21_re,s21_im"] + [f"{1e9 + k},1,0" for k in range(20)]
    rows[7] = "1e9,abc,0"
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(ValueError, match=r":8:"):
        read_trace(path)
    path.write_text("freq,re,im\n")
    with pytest.raises(ValueError, match=r":1:"):
        read_trace(path)


def test_trace_csv_round_trip(tmp_path):
    tr = synthetic_trace(sweep(F_R, loaded_q(QI, QC)), F_R, loaded_q(QI, QC), QC, 0.1, 0.7, 1.0, 2e-9)
    path = tmp_path / "t.csv"
    with open(path, "w", newline="") as fh:
        tr.to_csv(fh)
    again = read_trace(path)
    assert np.array_equal(again.freq, tr.freq) and np.array_equal(again.s21, tr.s21)


# --- fitting -----------------------------------------------------------------

@pytest.mark.parametrize("phi,tau,alpha,a", [(0.0, 0.0, 0.0, 1.0), (0.3, 40e-9, 1.0, 0.7), (-0.4, -5e-9, -2.0, 2.5)])
def test_noiseless_round_trip(phi, tau, alpha, a):
    ql = loaded_q(QI, QC, phi)
    fit = fit_resonance(synthetic_trace(sweep(F_R, ql), F_R, ql, QC, phi, a, alpha, tau))
    assert fit.Q_i == pytest.approx(QI, rel=1e-3)
    assert fit.Q_c_mag == pytest.approx(QC, rel=1e-3)
    assert fit.Q_l == pytest.approx(ql, rel=1e-3)
    assert fit.f_r == pytest.approx(F_R, rel=1e-3)
    assert fit.phi == pytest.approx(phi, abs=1e-3)
    assert fit.a == pytest.approx(a, rel=1e-3)
    assert fit.identity_error() < 1e-12


@settings(max_examples=30, deadline=None)
@given(
    log_qi=st.floats(3, 6),
    log_qc=st.floats(4, 6),
    phi=st.floats(-0.5, 0.5),
    points=st.sampled_from([201, 401, 1001]),
)
def test_round_trip_property(log_qi, log_qc, phi, points):
    qi, qc = 10**log_qi, 10**log_qc
    ql = loaded_q(qi, qc, phi)
    fit = fit_resonance(synthetic_trace(sweep(7.3e9, ql, points), 7.3e9, ql, qc, phi, 0.9, 0.5, 1e-9))
    assert fit.Q_i == pytest.approx(qi, rel=1e-3)
    assert fit.Q_c_mag == pytest.approx(qc, rel=1e-3)
    assert fit.phi == pytest.approx(phi, abs=1e-3)
    assert fit.identity_error() < 1e-12


def test_normalisation_invariance():
    ql = loaded_q(QI, QC, 0.2)
    tr = synthetic_trace(sweep(F_R, ql), F_R, ql, QC, 0.2, 1.0, 0.0, 10e-9, snr_db=50, rng=4)
    base = fit_resonance(tr)
    scaled = fit_resonance(S21Trace(tr.freq, tr.s21 * 0.37 * np.exp(2.1j)))
    for name in ("Q_i", "Q_l", "Q_c_mag"):
        assert getattr(scaled, name) == pytest.approx(getattr(base, name), rel=1e-4)


def test_noisy_fit_is_unbiased():
    ql = loaded_q(QI, QC)
    errs = [
        fit_resonance(synthetic_trace(sweep(F_R, ql, 2001), F_R, ql, QC, snr_db=40, rng=s)).Q_i / QI - 1
        for s in range(20)
    ]
    assert abs(np.mean(errs)) < 0.02


def test_flat_trace_has_no_dip():
    f = np.linspace(F_R - 1e6, F_R + 1e6, 401)
    with pytest.raises(FitError, match="no resonance"):
        fit_resonance(S21Trace(f, np.ones_like(f) * np.exp(0.3j)))
    rng = np.random.default_rng(0)
    noise = 0.01 * (rng.normal(size=f.size) + 1j * rng.normal(size=f.size))
    with pytest.raises(FitError):
        fit_resonance(S21Trace(f, 1 + noise))


# --- photon number -------------------------------------------------------------

def test_photon_number_scaling():
    fit = make_fit()
    assert avg_photon_number(fit, 0.0) == 0.0
    p = 1e-17
    assert avg_photon_number(fit, 2 * p) == pytest.approx(2 * avg_photon_number(fit, p))
    with pytest.raises(ValueError):
        avg_photon_number(fit, -1e-18)


def test_single_photon_power_inversion():
    fit = make_fit()
    omega = 2 * math.pi * fit.f_r
    p1 = fit.Q_c_mag * hbar * omega**2 / (2 * fit.Q_l**2)
    assert avg_photon_number(fit, p1) == pytest.approx(1.0, rel=1e-12)


# --- crosstalk -------------------------------------------------------------------

def test_crosstalk_of_reference_dip():
    f = np.linspace(8.6645e9 - 250e6, 8.6645e9 + 250e6, 2001)
    res = crosstalk_spectrum(dip_trace(f, 8.6645e9, 3.548e-3, 10e6))
    assert res.max_db == pytest.approx(20 * math.log10(3.548e-3), abs=0.05)
    assert res.f_at_max == pytest.approx(8.6645e9)
    assert res.max_db == res.crosstalk_db.max()
    assert np.all(res.crosstalk_db <= 0)
    assert res.bandwidth_3db_hz > 0


def test_crosstalk_floor():
    f = np.linspace(1e9, 2e9, 100)
    res = crosstalk_spectrum(S21Trace(f, np.ones(100, dtype=complex)))
    assert np.allclose(res.crosstalk_db, -160.0)


def test_crosstalk_peak_of_notch_is_at_resonance():
    ql = loaded_q(QI, QC)
    f = sweep(F_R, ql, 801, 50)
    res = crosstalk_spectrum(synthetic_trace(f, F_R, ql, QC))
    assert abs(res.f_at_max - F_R) <= f[1] - f[0]


def test_crosstalk_increases_with_depth():
    f = np.linspace(8.5e9, 8.8e9, 1001)
    peaks = [crosstalk_spectrum(dip_trace(f, 8.65e9, d, 10e6)).max_db for d in (1e-4, 1e-3, 1e-2, 0.1)]
    assert all(b > a for a, b in zip(peaks, peaks[1:]))


def test_crosstalk_needs_normalisable_baseline():
    f = np.linspace(1e9, 2e9, 100)
    with pytest.raises(ValueError):
        crosstalk_spectrum(S21Trace(f, 0.1 * np.ones(100, dtype=complex)))
