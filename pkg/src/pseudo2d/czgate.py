"""CZ gate between two transmons coupled through a lossy resonator.

Model (angular frequencies, hbar = 1)::

    H = w_r a^dag a + sum_i [ w_i b_i^dag b_i + (eta_i/2) n_i (n_i - 1)
                              + g_i (a^dag b_i + a b_i^dag) ]

with three transmon levels and five resonator levels by default.  The only loss
channel is photon decay, ``sqrt(kappa) a`` with ``kappa = w_r / Q_i``.  The CZ
phase comes from one full |11> <-> |02> oscillation mediated by the resonator.

``H`` conserves the total excitation number ``N``, and the dissipator is
invariant under ``a -> a exp(-i w_r t)``, so the master equation is integrated
in the frame rotating at ``w_r N`` and rotated back exactly afterwards.  No
approximation is involved; it only removes the 6 GHz carrier from the step size
control.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .fidelity import CZ, QuantumChannel, avg_gate_fidelity, phase_correct

TWO_PI = 2.0 * np.pi
RTOL = 1e-9
ATOL = 1e-11
CALIBRATION_Q = 1e6
SURFACE_CODE_THRESHOLD = 0.0075
DEFAULT_Q_GRID = (1e2, 3e2, 1e3, 2e3, 3e3, 1e4, 1e5, 1e6)


class IntegrationError(RuntimeError):
    pass


class ManifoldError(RuntimeError):
    """The |11>/|02> branches could not be identified among the dressed states."""


@dataclass(frozen=True)
class DeviceParams:
    omega_r: float
    omega01: tuple[float, float]
    eta: tuple[float, float]
    g: tuple[float, float]
    q_levels: int = 3
    r_levels: int = 5
    Q_i: float | None = None
    kappa: float | None = None
    g_eff: float | None = None
    t_gate: float | None = None

    def __post_init__(self) -> None:
        for name in ("omega01", "eta", "g"):
            value = tuple(float(x) for x in getattr(self, name))
            if len(value) != 2:
                raise ValueError(f"{name} needs one value per qubit")
            object.__setattr__(self, name, value)
        if self.q_levels < 3:
            raise ValueError("q_levels must be >= 3 (the |2> level carries the CZ)")
        if self.r_levels < 2:
            raise ValueError("r_levels must be >= 2")
        if self.Q_i is not None and not self.Q_i > 0:
            raise ValueError(f"Q_i must be positive, got {self.Q_i}")
        if self.kappa is not None and self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.Q_i is not None and self.kappa is not None:
            expected = 0.0 if math.isinf(self.Q_i) else self.omega_r / self.Q_i
            if not math.isclose(self.kappa, expected, rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError(
                    f"kappa={self.kappa:.6g} rad/s is inconsistent with "
                    f"omega_r/Q_i={expected:.6g} rad/s"
                )

    @property
    def loss_rate(self) -> float:
        if self.kappa is not None:
            return float(self.kappa)
        if self.Q_i is not None and not math.isinf(self.Q_i):
            return self.omega_r / self.Q_i
        return 0.0

    @property
    def dim(self) -> int:
        return self.q_levels**2 * self.r_levels

    def with_quality(self, Q: float) -> DeviceParams:
        kappa = 0.0 if math.isinf(Q) else self.omega_r / Q
        return replace(self, Q_i=Q, kappa=kappa)

    def with_kappa(self, kappa: float) -> DeviceParams:
        return replace(self, Q_i=None, kappa=kappa)

    # JSON files carry linear frequencies in Hz
    @classmethod
    def from_json_dict(cls, data: dict) -> DeviceParams:
        known = {
            "omega_r_hz", "omega01_hz", "eta_hz", "g_hz", "q_levels", "r_levels",
            "Q_i", "kappa_per_s", "g_eff_hz", "t_gate_s",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown device parameter keys: {sorted(unknown)}")
        try:
            return cls(
                omega_r=TWO_PI * float(data["omega_r_hz"]),
                omega01=tuple(TWO_PI * float(x) for x in data["omega01_hz"]),
                eta=tuple(TWO_PI * float(x) for x in data["eta_hz"]),
                g=tuple(TWO_PI * float(x) for x in data["g_hz"]),
                q_levels=int(data.get("q_levels", 3)),
                r_levels=int(data.get("r_levels", 5)),
                Q_i=None if data.get("Q_i") is None else float(data["Q_i"]),
                kappa=None if data.get("kappa_per_s") is None else float(data["kappa_per_s"]),
                g_eff=None if data.get("g_eff_hz") is None else TWO_PI * float(data["g_eff_hz"]),
                t_gate=None if data.get("t_gate_s") is None else float(data["t_gate_s"]),
            )
        except KeyError as exc:
            raise ValueError(f"missing device parameter {exc}") from exc

    def to_json_dict(self) -> dict:
        out = {
            "omega_r_hz": self.omega_r / TWO_PI,
            "omega01_hz": [w / TWO_PI for w in self.omega01],
            "eta_hz": [e / TWO_PI for e in self.eta],
            "g_hz": [g / TWO_PI for g in self.g],
            "q_levels": self.q_levels,
            "r_levels": self.r_levels,
            "Q_i": self.Q_i,
            "kappa_per_s": self.kappa,
            "g_eff_hz": None if self.g_eff is None else self.g_eff / TWO_PI,
            "t_gate_s": self.t_gate,
        }
        return out


def reference_device() -> DeviceParams:
    """5.6 / 5.8 GHz transmons, -200 MHz anharmonicity, 6 GHz bus, g/2pi = 81.2 MHz."""
    return DeviceParams(
        omega_r=TWO_PI * 6.0e9,
        omega01=(TWO_PI * 5.6e9, TWO_PI * 5.8e9),
        eta=(TWO_PI * -200e6, TWO_PI * -200e6),
        g=(TWO_PI * 81.2e6, TWO_PI * 81.2e6),
    )


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def _lowering(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def ladder_operators(q_levels: int = 3, r_levels: int = 5) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(b1, b2, a) on the ordering |n1, n2; n_a>."""
    iq, ir = np.eye(q_levels), np.eye(r_levels)
    b = _lowering(q_levels)
    b1 = np.kron(np.kron(b, iq), ir)
    b2 = np.kron(np.kron(iq, b), ir)
    a = np.kron(np.kron(iq, iq), _lowering(r_levels))
    return b1, b2, a


def basis_index(params: DeviceParams, n1: int, n2: int, na: int = 0) -> int:
    return (n1 * params.q_levels + n2) * params.r_levels + na


def excitation_number(params: DeviceParams) -> np.ndarray:
    q, r = params.q_levels, params.r_levels
    n1, n2, na = np.meshgrid(np.arange(q), np.arange(q), np.arange(r), indexing="ij")
    return (n1 + n2 + na).reshape(-1)


def build_hamiltonian(params: DeviceParams) -> np.ndarray:
    b1, b2, a = ladder_operators(params.q_levels, params.r_levels)
    ident = np.eye(params.dim)
    h = params.omega_r * (a.T @ a)
    for b, w, eta, g in zip((b1, b2), params.omega01, params.eta, params.g):
        n = b.T @ b
        h = h + w * n + 0.5 * eta * n @ (n - ident) + g * (a.T @ b + a @ b.T)
    return 0.5 * (h + h.conj().T)


def check_cz_condition(params: DeviceParams) -> float:
    """Bare detuning of |11> from |02>: w1 - (w2 + eta2), zero on resonance."""
    return params.omega01[0] - (params.omega01[1] + params.eta[1])


def gate_time(g_eff: float) -> float:
    """Duration of one full |11> <-> |02> cycle, pi / (sqrt(2) g_eff)."""
    if not g_eff > 0:
        raise ValueError(f"g_eff must be positive, got {g_eff}")
    return math.pi / (math.sqrt(2.0) * g_eff)


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------

def _cz_branches(params: DeviceParams) -> tuple[np.ndarray, np.ndarray]:
    """Energies and vectors (in the two-excitation block) of the |11>/|02> branches."""
    h = build_hamiltonian(params)
    idx = np.flatnonzero(excitation_number(params) == 2)
    evals, evecs = np.linalg.eigh(h[np.ix_(idx, idx)])
    targets = [
        int(np.flatnonzero(idx == basis_index(params, 1, 1))[0]),
        int(np.flatnonzero(idx == basis_index(params, 0, 2))[0]),
    ]
    weight = np.sum(np.abs(evecs[targets, :]) ** 2, axis=0)
    pick = np.sort(np.argsort(weight)[-2:])
    if np.any(weight[pick] < 0.5):
        raise ManifoldError(
            f"dressed |11>/|02> branches carry only {weight[pick].round(3)} of the bare states"
        )
    return evals[pick], evecs[:, pick]


def avoided_crossing(params: DeviceParams, span: float | None = None) -> tuple[float, float]:
    """Shift of qubit 1's frequency that minimises the |11>/|02> gap, and that gap."""
    if span is None:
        span = max(abs(params.g[0]) + abs(params.g[1]), TWO_PI * 1e6)

    def gap(shift: float) -> float:
        w = (params.omega01[0] + shift, params.omega01[1])
        evals, _ = _cz_branches(replace(params, omega01=w))
        return float(evals[1] - evals[0])

    res = minimize_scalar(
        gap, bounds=(-span, span), method="bounded", options={"xatol": 1e-3 * TWO_PI}
    )
    return float(res.x), float(res.fun)


def estimate_g_eff(params: DeviceParams) -> float:
    """Effective qubit-qubit coupling from the minimum |11>/|02> splitting, gap / (2 sqrt 2)."""
    _, gap = avoided_crossing(params)
    return gap / (2.0 * math.sqrt(2.0))


def tune_to_cz(params: DeviceParams) -> tuple[DeviceParams, float]:
    """Move qubit 1 onto the dressed |11>/|02> resonance; returns (params, shift)."""
    shift, _ = avoided_crossing(params)
    w = (params.omega01[0] + shift, params.omega01[1])
    return replace(params, omega01=w), shift


def computational_basis(params: DeviceParams, kind: str = "dressed") -> np.ndarray:
    """Columns |00>, |01>, |10>, |11> (resonator empty) as vectors of the full space.

    ``kind="bare"`` returns unit vectors.  ``kind="dressed"`` returns the
    eigenstates continuously connected to the bare states, with phases fixed
    so that each overlaps its bare partner positively.  |11> is resonantly
    mixed with |02>, so it is taken from the two-dimensional eigenspace of that
    pair: the bare |11>, |02> are projected onto it and orthonormalised
    symmetrically (closest orthonormal frame to the bare pair).
    """
    labels = [(0, 0), (0, 1), (1, 0), (1, 1)]
    bare_idx = [basis_index(params, *lab) for lab in labels]
    dim = params.dim
    if kind == "bare":
        return np.eye(dim, dtype=complex)[:, bare_idx]
    if kind != "dressed":
        raise ValueError(f"unknown basis kind {kind!r}")
    _, vecs = np.linalg.eigh(build_hamiltonian(params))
    cols = []
    for k in bare_idx[:3]:
        m = int(np.argmax(np.abs(vecs[k, :])))
        v = vecs[:, m]
        cols.append(v * np.exp(-1j * np.angle(v[k])))
    k11, k02 = basis_index(params, 1, 1), basis_index(params, 0, 2)
    weight = np.abs(vecs[k11, :]) ** 2 + np.abs(vecs[k02, :]) ** 2
    span = vecs[:, np.argsort(weight)[-2:]]
    proj = span @ (span.conj().T[:, [k11, k02]])
    u, _, vh = np.linalg.svd(proj, full_matrices=False)
    frame = u @ vh
    cols.append(frame[:, 0])
    return np.array(cols, dtype=complex).T


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------

def _propagate(params: DeviceParams, rhos: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """Lab-frame states at each time for a batch of initial density matrices.

    ``rhos`` has shape (B, dim, dim); the result has shape (len(times), B, dim, dim).
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("evolution times must be >= 0")
    dim = params.dim
    rhos = np.asarray(rhos, dtype=complex).reshape(-1, dim, dim)
    nexc = excitation_number(params).astype(float)
    h_rot = build_hamiltonian(params) - params.omega_r * np.diag(nexc)
    _, _, a = ladder_operators(params.q_levels, params.r_levels)
    n_a = a.T @ a
    kappa = params.loss_rate
    shape = rhos.shape

    def rhs(_t, y):
        r = y.reshape(shape)
        out = -1j * (h_rot @ r - r @ h_rot)
        if kappa:
            out += kappa * (a @ r @ a.T - 0.5 * (n_a @ r + r @ n_a))
        return out.reshape(-1)

    order = np.argsort(times)
    t_sorted = times[order]
    out = np.empty((len(times),) + shape, dtype=complex)
    t_end = t_sorted[-1] if len(t_sorted) else 0.0
    if t_end == 0.0:
        out[:] = rhos
    else:
        sol = solve_ivp(
            rhs, (0.0, t_end), rhos.reshape(-1), method="DOP853",
            t_eval=t_sorted, rtol=RTOL, atol=ATOL,
        )
        if not sol.success:
            raise IntegrationError(sol.message)
        out[order] = sol.y.T.reshape((len(times),) + shape)
    for k, t in enumerate(times):
        phase = np.exp(-1j * params.omega_r * nexc * t)
        out[k] = phase[:, None] * out[k] * phase.conj()[None, :]
    out = 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))
    return out


def _propagate_operators(params: DeviceParams, ops: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """Like :func:`_propagate` but without Hermitian symmetrisation (for |i><j| inputs)."""
    times = np.asarray(times, dtype=float)
    dim = params.dim
    ops = np.asarray(ops, dtype=complex).reshape(-1, dim, dim)
    herm = ops + np.conj(np.swapaxes(ops, -1, -2))
    anti = -1j * (ops - np.conj(np.swapaxes(ops, -1, -2)))
    both = _propagate(params, np.concatenate([herm, anti]), times)
    n = len(ops)
    return 0.5 * (both[:, :n] + 1j * both[:, n:])


def evolve(params: DeviceParams, rho0: np.ndarray, t: float) -> np.ndarray:
    """Density matrix at time ``t`` under the damped model, starting from ``rho0``."""
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if rho0.shape != (params.dim, params.dim):
        raise ValueError(f"rho0 must be {params.dim}x{params.dim}, got {rho0.shape}")
    if t < 0:
        raise ValueError("t must be >= 0")
    return _propagate(params, rho0[None], [t])[0, 0]


def channel_tomography_series(
    params: DeviceParams, times: Sequence[float], basis: str = "dressed"
) -> list[QuantumChannel]:
    """Two-qubit channels at several gate durations from one integration."""
    vecs = computational_basis(params, basis)
    d = vecs.shape[1]
    # Hermitian basis of operators on the subspace keeps every propagated state Hermitian.
    herm_ops = []
    coeff = np.zeros((d * d, d * d), dtype=complex)  # |i><j| = sum_k coeff[ij, k] herm_k
    for i in range(d):
        for j in range(d):
            if i == j:
                op = np.zeros((d, d), complex)
                op[i, i] = 1
                herm_ops.append(op)
                coeff[i * d + i, len(herm_ops) - 1] = 1
            elif i < j:
                sym = np.zeros((d, d), complex)
                sym[i, j] = sym[j, i] = 0.5
                asym = np.zeros((d, d), complex)
                asym[i, j], asym[j, i] = -0.5j, 0.5j
                herm_ops += [sym, asym]
                ks, ka = len(herm_ops) - 2, len(herm_ops) - 1
                coeff[i * d + j, ks], coeff[i * d + j, ka] = 1, 1j
                coeff[j * d + i, ks], coeff[j * d + i, ka] = 1, -1j
    lifted = np.array([vecs @ op @ vecs.conj().T for op in herm_ops])
    states = _propagate(params, lifted, times)
    channels = []
    for k in range(len(times)):
        reduced = np.einsum("ai,nab,bj->nij", vecs.conj(), states[k], vecs)
        mats = np.einsum("mk,kij->mij", coeff, reduced)
        herm_err = np.max(np.abs(
            mats.reshape(d, d, d, d) - np.conj(mats.reshape(d, d, d, d).transpose(1, 0, 3, 2))
        ))
        if herm_err > 1e-8:
            raise IntegrationError(f"propagated basis lost Hermiticity ({herm_err:.2e})")
        transfer = mats.reshape(d * d, d * d).T
        channels.append(QuantumChannel(transfer, trace_preserving=False))
    return channels


def channel_tomography(params: DeviceParams, t: float, basis: str = "dressed") -> QuantumChannel:
    """Transfer matrix on the two-qubit computational subspace after time ``t``."""
    return channel_tomography_series(params, [t], basis)[0]


# ---------------------------------------------------------------------------
# Calibration and sweeps
# ---------------------------------------------------------------------------

@dataclass
class Calibration:
    params: DeviceParams
    omega1_shift: float
    g_eff: float
    t_nominal: float
    t_gate: float
    floor_infidelity: float

    def summary(self) -> dict:
        return {
            "omega1_shift_hz": self.omega1_shift / TWO_PI,
            "g_eff_hz": self.g_eff / TWO_PI,
            "t_nominal_s": self.t_nominal,
            "t_gate_s": self.t_gate,
            "floor_infidelity": self.floor_infidelity,
        }


def corrected_infidelity(channel: QuantumChannel) -> float:
    corrected, _ = phase_correct(channel)
    return 1.0 - avg_gate_fidelity(corrected, CZ)


def calibrate(
    params: DeviceParams,
    tune: bool = True,
    q_factor: float = CALIBRATION_Q,
    grid: int = 21,
) -> Calibration:
    """Tune qubit 1 to the dressed CZ resonance and pick the best gate duration.

    The duration is searched over [0.9, 1.1] x pi/(sqrt(2) g_eff) at
    ``q_factor``: a coarse grid from one integration, then a bounded scalar
    search whose evaluations restart from the nearest grid point.
    """
    if tune:
        tuned, shift = tune_to_cz(params)
    else:
        tuned, shift = params, 0.0
    g_eff = estimate_g_eff(tuned)
    t0 = gate_time(g_eff)
    lossy = tuned.with_quality(q_factor)

    times = np.linspace(0.9 * t0, 1.1 * t0, grid)
    coarse = channel_tomography_series(lossy, times)
    infid = np.array([corrected_infidelity(ch) for ch in coarse])
    best = int(np.argmin(infid))
    lo, hi = times[max(best - 1, 0)], times[min(best + 1, grid - 1)]

    def objective(t: float) -> float:
        return corrected_infidelity(channel_tomography(lossy, t))

    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-4 * t0, "maxiter": 25})
    t_gate, floor = (res.x, res.fun) if res.fun <= infid[best] else (times[best], infid[best])
    tuned = replace(tuned, g_eff=g_eff, t_gate=float(t_gate))
    return Calibration(tuned, shift, g_eff, t0, float(t_gate), float(floor))


@dataclass
class FidelityPoint:
    Q_i: float
    kappa: float
    avg_fidelity: float
    infidelity: float
    raw_infidelity: float
    theta: tuple[float, float] = (0.0, 0.0)
    phase_corrected: bool = True


def fidelity_point(params: DeviceParams, Q: float, t_gate: float) -> FidelityPoint:
    if not Q > 0:
        raise ValueError(f"quality factor must be positive, got {Q}")
    lossy = params.with_quality(Q)
    channel = channel_tomography(lossy, t_gate)
    raw = avg_gate_fidelity(channel, CZ)
    corrected, theta = phase_correct(channel)
    fid = avg_gate_fidelity(corrected, CZ)
    return FidelityPoint(
        Q_i=float(Q), kappa=lossy.loss_rate, avg_fidelity=fid, infidelity=1.0 - fid,
        raw_infidelity=1.0 - raw, theta=theta,
    )


def q_sweep(
    params: DeviceParams,
    q_values: Iterable[float] = DEFAULT_Q_GRID,
    calibration: Calibration | None = None,
) -> tuple[list[FidelityPoint], Calibration]:
    """Gate infidelity versus resonator quality factor at a fixed calibrated gate."""
    q_values = list(q_values)
    if any(not q > 0 for q in q_values):
        raise ValueError("quality factors must be positive")
    if calibration is None:
        calibration = calibrate(params)
    points = [fidelity_point(calibration.params, q, calibration.t_gate) for q in q_values]
    return points, calibration


def is_nonincreasing(points: Sequence[FidelityPoint], slack: float = 1e-5) -> bool:
    ordered = sorted(points, key=lambda p: p.Q_i)
    return all(b.infidelity <= a.infidelity + slack for a, b in zip(ordered, ordered[1:]))


def threshold_crossing(points: Sequence[FidelityPoint], level: float = SURFACE_CODE_THRESHOLD) -> float | None:
    """Quality factor where the corrected infidelity first drops below ``level``.

    Interpolated linearly in log(Q) / log(infidelity) between bracketing points;
    None when no pair of sampled points brackets the level.
    """
    ordered = sorted(points, key=lambda p: p.Q_i)
    for a, b in zip(ordered, ordered[1:]):
        if a.infidelity >= level > b.infidelity:
            if math.isinf(b.Q_i):
                return a.Q_i
            x0, x1 = math.log(a.Q_i), math.log(b.Q_i)
            y0, y1 = math.log(a.infidelity), math.log(b.infidelity)
            return math.exp(x0 + (math.log(level) - y0) * (x1 - x0) / (y1 - y0))
    return None


CSV_HEADER = ["q_factor", "kappa_rad_s", "infidelity_raw", "infidelity_corrected", "theta1", "theta2"]


def sweep_to_csv(points: Sequence[FidelityPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in points:
        writer.writerow([
            repr(p.Q_i), repr(p.kappa), repr(p.raw_infidelity), repr(p.infidelity),
            repr(p.theta[0]), repr(p.theta[1]),
        ])
    return buf.getvalue()
