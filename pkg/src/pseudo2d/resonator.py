"""Notch-type resonator fits, photon number and crossing crosstalk.

Transmission past a resonator hanging off a feedline::

    S21(f) = a e^{i alpha} e^{-2 pi i f tau}
             [1 - (Q_l/|Q_c|) e^{i phi} / (1 + 2 i Q_l (f/f_r - 1))]

The fit follows the usual circle route: remove the cable delay, fit a circle in
the complex plane, fit the phase around the circle centre for ``f_r`` and
``Q_l``, read the environment ``a e^{i alpha}`` off the point opposite
resonance, then polish everything with a complex least-squares fit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import TextIO

import numpy as np
from scipy.constants import hbar
from scipy.ndimage import uniform_filter1d
from scipy.optimize import least_squares, minimize_scalar

MIN_POINTS = 16
TRACE_HEADER = ("frequency_hz", "s21_re", "s21_im")


class FitError(RuntimeError):
    pass


@dataclass
class S21Trace:
    freq: np.ndarray
    s21: np.ndarray
    power_dbm: float | None = None

    def __post_init__(self) -> None:
        self.freq = np.asarray(self.freq, dtype=float)
        self.s21 = np.asarray(self.s21, dtype=complex)
        if self.freq.ndim != 1 or self.freq.shape != self.s21.shape:
            raise ValueError("freq and s21 must be 1-d arrays of equal length")
        if len(self.freq) < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} points, got {len(self.freq)}")
        if not np.all(np.isfinite(self.freq)) or not np.all(np.isfinite(self.s21)):
            raise ValueError("trace contains non-finite values")
        if np.any(np.diff(self.freq) <= 0):
            raise ValueError("frequencies must be strictly increasing")

    def to_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for f, s in zip(self.freq, self.s21):
            w.writerow([repr(float(f)), repr(float(s.real)), repr(float(s.imag))])


def read_trace(path: str | Path) -> S21Trace:
    """Read a ``frequency_hz,s21_re,s21_im`` CSV, reporting bad rows by line number."""
    freqs, vals = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if tuple(h.strip() for h in header) != TRACE_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(TRACE_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{line}: expected 3 columns, got {len(row)}")
            try:
                f, re_, im = (float(c) for c in row)
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from exc
            freqs.append(f)
            vals.append(complex(re_, im))
    try:
        return S21Trace(np.array(freqs), np.array(vals))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def notch_s21(
    freqs: np.ndarray,
    f_r: float,
    Q_l: float,
    Qc_mag: float,
    phi: float,
    a: float = 1.0,
    alpha: float = 0.0,
    tau: float = 0.0,
) -> np.ndarray:
    if not f_r > 0:
        raise ValueError(f"f_r must be positive, got {f_r}")
    freqs = np.asarray(freqs, dtype=float)
    env = a * np.exp(1j * alpha) * np.exp(-2j * np.pi * freqs * tau)
    return env * (1 - (Q_l / Qc_mag) * np.exp(1j * phi) / (1 + 2j * Q_l * (freqs / f_r - 1)))


def model_s21(freqs: np.ndarray, fit: ResonatorFit) -> np.ndarray:
    return notch_s21(freqs, fit.f_r, fit.Q_l, fit.Q_c_mag, fit.phi, fit.a, fit.alpha, fit.tau)


def internal_q(Q_l: float, Qc_mag: float, phi: float) -> float:
    """1/Q_i = 1/Q_l - cos(phi)/|Q_c|; infinite when the loaded Q is all coupling."""
    inv = 1.0 / Q_l - math.cos(phi) / Qc_mag
    return math.inf if inv <= 0 else 1.0 / inv


@dataclass
class ResonatorFit:
    f_r: float
    Q_l: float
    Q_c_mag: float
    phi: float
    Q_i: float
    tau: float
    a: float
    alpha: float
    residual: float

    def identity_error(self) -> float:
        """Relative violation of 1/Q_l = 1/Q_i + cos(phi)/|Q_c|."""
        lhs = 1.0 / self.Q_l
        return abs(lhs - 1.0 / self.Q_i - math.cos(self.phi) / self.Q_c_mag) / lhs

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _kasa(z: np.ndarray) -> tuple[complex, float]:
    x, y = z.real, z.imag
    A = np.column_stack([x, y, np.ones_like(x)])
    (c0, c1, c2), *_ = np.linalg.lstsq(A, x**2 + y**2, rcond=None)
    xc, yc = c0 / 2, c1 / 2
    return complex(xc, yc), math.sqrt(max(c2 + xc**2 + yc**2, 0.0))


def fit_circle(z: np.ndarray) -> tuple[complex, float]:
    """Algebraic (Kasa) circle fit refined geometrically; returns (centre, radius)."""
    zc, r = _kasa(z)

    def resid(p):
        return np.hypot(z.real - p[0], z.imag - p[1]) - p[2]

    sol = least_squares(resid, [zc.real, zc.imag, r], method="lm")
    xc, yc, r = sol.x
    return complex(xc, yc), abs(r)


def _wing_mask(n: int, frac: float = 0.1) -> np.ndarray:
    k = max(2, int(round(n * frac / 2)))
    mask = np.zeros(n, dtype=bool)
    mask[:k] = True
    mask[-k:] = True
    return mask


def _estimate_delay(freqs: np.ndarray, s21: np.ndarray) -> float:
    """Cable delay: linear phase fit on the wings, then the delay that makes the data most circular."""
    mask = _wing_mask(len(freqs))
    phase = np.unwrap(np.angle(s21))
    slope = np.polyfit(freqs[mask], phase[mask], 1)[0]
    tau0 = -slope / (2 * np.pi)
    span = freqs[-1] - freqs[0]
    df = freqs - 0.5 * (freqs[0] + freqs[-1])
    scale = np.mean(np.abs(s21)) ** 2

    def cost(tau):
        z = s21 * np.exp(2j * np.pi * df * tau)
        zc, r = _kasa(z)
        return float(np.mean((np.abs(z - zc) - r) ** 2)) / scale

    step = 0.005 / span
    grid = tau0 + step * np.arange(-100, 101)
    vals = np.array([cost(t) for t in grid])
    k = int(np.argmin(vals))
    res = minimize_scalar(cost, bounds=(grid[k] - step, grid[k] + step), method="bounded",
                          options={"xatol": 1e-6 / span})
    return float(res.x) if res.fun <= vals[k] else float(grid[k])


def _noise_sigma(s21: np.ndarray) -> float:
    """Per-quadrature noise from second differences (insensitive to smooth structure)."""
    d2 = s21[2:] - 2 * s21[1:-1] + s21[:-2]
    mad = np.median(np.abs(np.concatenate([d2.real, d2.imag])))
    return float(mad / 0.6745 / math.sqrt(6.0))


def fit_resonance(trace: S21Trace, tau: float | None = None) -> ResonatorFit:
    """Fit the notch model to a transmission trace.

    Raises :class:`FitError` when no resonance dip stands clear of the noise
    or the least-squares polish does not converge.
    """
    f, s = trace.freq, trace.s21
    sigma = _noise_sigma(s)
    window = max(1, len(s) // 100) | 1
    smooth = uniform_filter1d(np.abs(s), window, mode="nearest")
    baseline = float(np.median(np.abs(s[_wing_mask(len(f))])))
    if baseline <= 0:
        raise FitError("trace has zero off-resonant transmission")
    depth = baseline - float(smooth.min())
    # 5 sigma of the smoothed noise clears the extreme-value tail of a flat trace
    if depth < 5 * sigma / math.sqrt(window) or depth < 1e-6 * baseline:
        raise FitError(f"no resonance found: dip depth {depth:.3g} vs noise {sigma:.3g}")

    if tau is None:
        tau = _estimate_delay(f, s)
    z = s * np.exp(2j * np.pi * f * tau)
    zc, r = fit_circle(z)

    # phase around the centre, theta = theta0 + 2 arctan(2 Q_l (1 - f/f_r))
    theta = np.angle(z - zc)
    k_min = int(np.argmin(smooth))
    f_guess = f[k_min]
    below = np.flatnonzero(smooth < baseline - 0.5 * (baseline - smooth[k_min]))
    fwhm = (f[below[-1]] - f[below[0]]) if len(below) > 1 else (f[-1] - f[0]) / 20
    Ql_guess = f_guess / max(fwhm, f[1] - f[0])

    # residuals wrapped to (-pi, pi]: noisy points near the centre must not unwrap by 2 pi
    def phase_resid(p):
        th0, fr, lql = p
        model = th0 + 2 * np.arctan(2 * math.exp(min(lql, 50.0)) * (1 - f / fr))
        return np.angle(np.exp(1j * (theta - model)))

    p0 = [theta[k_min], f_guess, math.log(Ql_guess)]
    sol = least_squares(phase_resid, p0, x_scale=[1.0, fwhm, 1.0], method="lm")
    th0, f_r, lql = sol.x
    Q_l = math.exp(lql)

    # off-resonant point sits opposite the resonance point on the circle
    env = zc + r * np.exp(1j * (th0 + np.pi))
    a, alpha = abs(env), float(np.angle(env))
    zn_c, rn = zc / env, r / abs(env)
    Qc_mag = Q_l / (2 * rn)
    phi = float(np.angle(1 - zn_c))

    # full complex polish, centred so the cable delay does not couple to the
    # 10 GHz carrier: e^{-2 pi i f tau} = e^{-2 pi i f_c tau} e^{-2 pi i (f - f_c) tau}
    fc = 0.5 * (f[0] + f[-1])
    span = f[-1] - f[0]
    lw = f_r / Q_l
    df = f - fc

    def unpack(p):
        u, lql, lqc, ph, amp, beta, v = p
        lql, lqc = np.clip([lql, lqc], -50.0, 50.0)
        return fc + u * lw, math.exp(lql), math.exp(lqc), ph, amp, beta, v / span

    def resid(p):
        fr, ql, qc, ph, amp, beta, tu = unpack(p)
        m = amp * np.exp(1j * beta - 2j * np.pi * df * tu) * (
            1 - (ql / qc) * np.exp(1j * ph) / (1 + 2j * ql * (f / fr - 1))
        )
        d = m - s
        return np.concatenate([d.real, d.imag])

    beta0 = alpha - 2 * np.pi * fc * tau
    p0 = [(f_r - fc) / lw, math.log(Q_l), math.log(Qc_mag), phi, a, beta0, tau * span]
    try:
        pol = least_squares(resid, p0, x_scale=[0.01, 0.01, 0.01, 0.01, 0.01 * a, 0.01, 0.01],
                            method="lm", max_nfev=4000, ftol=1e-14, xtol=1e-14, gtol=1e-14)
    except (ValueError, FloatingPointError) as exc:
        raise FitError(f"least-squares polish failed: {exc}") from exc
    if not pol.success:
        raise FitError(f"least-squares polish did not converge: {pol.message}")
    fr, Q_l, Qc_mag, ph, amp, beta, tu = unpack(pol.x)
    if not fr > 0:
        raise FitError(f"least-squares polish diverged (f_r={fr:.4g})")
    al = beta + 2 * np.pi * fc * tu
    ph = float(np.angle(np.exp(1j * ph)))
    if amp < 0:
        amp, al = -amp, al + np.pi
    al = float(np.angle(np.exp(1j * al)))
    rms = float(np.sqrt(np.mean(pol.fun**2)))
    Q_i = internal_q(Q_l, Qc_mag, ph)
    if not math.isfinite(Q_i):
        raise FitError(f"fitted Q_l={Q_l:.4g} leaves no internal loss (|Q_c|={Qc_mag:.4g}, phi={ph:.3g})")
    return ResonatorFit(
        f_r=float(fr), Q_l=Q_l, Q_c_mag=Qc_mag, phi=ph, Q_i=Q_i,
        tau=float(tu), a=float(amp), alpha=al, residual=rms,
    )


def avg_photon_number(fit: ResonatorFit, power_w: float) -> float:
    """Mean intracavity photon number, 2 Q_l^2 P / (|Q_c| hbar omega_r^2).

    ``power_w`` is the power at the resonator input in watts.
    """
    if power_w < 0 or not math.isfinite(power_w):
        raise ValueError(f"power must be finite and >= 0, got {power_w}")
    omega_r = 2 * math.pi * fit.f_r
    return 2 * fit.Q_l**2 * power_w / (fit.Q_c_mag * hbar * omega_r**2)


def dbm_to_watts(p_dbm: float) -> float:
    return 1e-3 * 10 ** (p_dbm / 10)


@dataclass
class CrosstalkResult:
    freq: np.ndarray
    crosstalk_db: np.ndarray
    max_db: float
    f_at_max: float
    bandwidth_3db_hz: float  # full width within 3 dB of max_db around the peak

    def to_dict(self) -> dict:
        return {
            "freq": self.freq.tolist(),
            "crosstalk_db": self.crosstalk_db.tolist(),
            "max_db": self.max_db,
            "f_at_max": self.f_at_max,
            "bandwidth_3db_hz": self.bandwidth_3db_hz,
        }


CROSSTALK_FLOOR = 1e-8


def crosstalk_spectrum(trace: S21Trace) -> CrosstalkResult:
    """Leakage into a crossed resonator, 20 log10(1 - |S21|), from the through transmission.

    ``|S21|`` is normalised by the median magnitude of the outer 10 % of
    points (5 % per side) and ``1 - |S21|`` is floored at 1e-8 (-160 dB).
    """
    mag = np.abs(trace.s21)
    ref = float(np.median(mag[_wing_mask(len(mag))]))
    if ref < 0.5:
        raise ValueError(
            f"off-resonant transmission {ref:.3g} is below 0.5; cannot normalise the baseline"
        )
    leak = np.maximum(1.0 - mag / ref, CROSSTALK_FLOOR)
    db = 20 * np.log10(leak)
    k = int(np.argmax(db))
    above = db >= db[k] - 3.0
    lo = k
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = k
    while hi < len(db) - 1 and above[hi + 1]:
        hi += 1
    return CrosstalkResult(
        freq=trace.freq.copy(), crosstalk_db=db, max_db=float(db[k]),
        f_at_max=float(trace.freq[k]), bandwidth_3db_hz=float(trace.freq[hi] - trace.freq[lo]),
    )


def dip_trace(
    freqs: np.ndarray, f0: float, depth: float, width: float
) -> S21Trace:
    """Normalised Lorentzian dip ``1 - depth / (1 + (2 (f - f0)/width)^2)``."""
    freqs = np.asarray(freqs, dtype=float)
    return S21Trace(freqs, 1.0 - depth / (1.0 + (2 * (freqs - f0) / width) ** 2) + 0j)


def synthetic_trace(
    freqs: np.ndarray,
    f_r: float,
    Q_l: float,
    Qc_mag: float,
    phi: float = 0.0,
    a: float = 1.0,
    alpha: float = 0.0,
    tau: float = 0.0,
    snr_db: float | None = None,
    rng: np.random.Generator | int | None = 0,
) -> S21Trace:
    """Model trace with optional circular complex Gaussian noise.

    ``snr_db`` is a^2 / E|n|^2, so each quadrature has standard deviation
    ``a 10^(-snr_db/20) / sqrt(2)``.
    """
    s = notch_s21(freqs, f_r, Q_l, Qc_mag, phi, a, alpha, tau)
    if snr_db is not None:
        rng = np.random.default_rng(rng)
        sigma = a * 10 ** (-snr_db / 20) / math.sqrt(2.0)
        s = s + sigma * (rng.normal(size=s.shape) + 1j * rng.normal(size=s.shape))
    return S21Trace(np.asarray(freqs, dtype=float), s)
