"""Transfer-matrix channels, Haar-averaged gate fidelity and virtual-Z correction.

Channels act on row-major vectorised density matrices, so a unitary ``U`` has
transfer matrix ``kron(U, U.conj())`` and ``T[:, i*d + j] = vec(E(|i><j|))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


@dataclass
class QuantumChannel:
    matrix: np.ndarray  # (d*d, d*d) complex transfer matrix
    trace_preserving: bool = False

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.matrix @ rho.reshape(-1)).reshape(d, d)

    def choi(self) -> np.ndarray:
        """Choi matrix sum_ij |i><j| (x) E(|i><j|)."""
        d = self.dim
        return self.matrix.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d)

    def trace_map(self) -> np.ndarray:
        """Matrix X with Tr E(rho) = Tr(X rho); X = 1 for trace-preserving maps."""
        d = self.dim
        out_trace = self.matrix.reshape(d, d, d, d)[np.arange(d), np.arange(d)].sum(axis=0)
        return out_trace.T


def unitary_channel(u: np.ndarray) -> QuantumChannel:
    u = np.asarray(u, dtype=complex)
    return QuantumChannel(np.kron(u, u.conj()), trace_preserving=True)


def kraus_channel(kraus: list[np.ndarray] | np.ndarray) -> QuantumChannel:
    mat = sum(np.kron(k, np.conj(k)) for k in kraus)
    d = np.asarray(kraus[0]).shape[0]
    tp = np.allclose(sum(k.conj().T @ k for k in kraus), np.eye(d), atol=1e-10)
    return QuantumChannel(np.asarray(mat, dtype=complex), trace_preserving=bool(tp))


def depolarizing_channel(d: int) -> QuantumChannel:
    vid = np.eye(d).reshape(-1)
    return QuantumChannel(np.outer(vid, vid).astype(complex) / d, trace_preserving=True)


def compose(first: QuantumChannel, second: QuantumChannel) -> QuantumChannel:
    """Channel ``second o first``."""
    return QuantumChannel(
        second.matrix @ first.matrix,
        trace_preserving=first.trace_preserving and second.trace_preserving,
    )


def avg_gate_fidelity(channel: QuantumChannel, ideal: np.ndarray = CZ) -> float:
    """Haar-averaged <psi| U^dag E(psi) U |psi> over pure states of the channel space.

    Second-moment (2-design) identity:
    ``F = (Tr[S_U^dag T] + Tr E(1)) / (d (d + 1))``; for trace-preserving
    maps ``Tr E(1) = d`` and this is the familiar ``(d F_pro + 1)/(d + 1)``.
    Trace lost to leakage therefore lowers the fidelity.
    """
    ideal = np.asarray(ideal, dtype=complex)
    d = ideal.shape[0]
    if channel.matrix.shape != (d * d, d * d):
        raise ValueError(
            f"channel of shape {channel.matrix.shape} does not act on a {d}-dim space"
        )
    overlap = np.trace(np.kron(ideal, ideal.conj()).conj().T @ channel.matrix)
    return float((overlap.real + np.trace(channel.trace_map()).real) / (d * (d + 1)))


def haar_states(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def monte_carlo_fidelity(
    channel: QuantumChannel,
    ideal: np.ndarray = CZ,
    samples: int = 10_000,
    rng: np.random.Generator | int | None = 0,
) -> tuple[float, float]:
    """Sampled estimate of the same average, returned as ``(mean, standard error)``."""
    rng = np.random.default_rng(rng)
    ideal = np.asarray(ideal, dtype=complex)
    d = ideal.shape[0]
    psi = haar_states(d, samples, rng)
    rho = np.einsum("ni,nj->nij", psi, psi.conj()).reshape(samples, -1)
    out = (rho @ channel.matrix.T).reshape(samples, d, d)
    target = psi @ ideal.T
    vals = np.einsum("ni,nij,nj->n", target.conj(), out, target).real
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))


def random_channel(d: int, n_kraus: int, rng: np.random.Generator) -> QuantumChannel:
    """Random CPTP map from a Haar-random Stinespring isometry."""
    u = haar_unitary(d * n_kraus, rng)
    v = u[:, :d]
    kraus = [v[k * d:(k + 1) * d, :] for k in range(n_kraus)]
    return kraus_channel(kraus)


def local_z(theta1: float, theta2: float) -> np.ndarray:
    """exp(-i theta1 Z/2) (x) exp(-i theta2 Z/2) on |q1 q2>."""
    z1 = np.exp(-0.5j * theta1 * np.array([1, -1]))
    z2 = np.exp(-0.5j * theta2 * np.array([1, -1]))
    return np.diag(np.kron(z1, z2))


def _phase_fidelity(channel: QuantumChannel, ideal: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Fidelity of local_z(theta) o channel against a diagonal ideal, vectorised over theta."""
    d = 4
    diag_t = np.diag(channel.matrix).reshape(d, d)
    u_ideal = np.diag(ideal)
    ideal_ph = np.outer(u_ideal, u_ideal.conj()).conj()
    # relative phase of |i><j| under the Z pair depends on bit differences only
    bits = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    s = 1 - 2 * bits  # +1 for |0>, -1 for |1>
    t1, t2 = np.atleast_1d(theta[..., 0]), np.atleast_1d(theta[..., 1])
    phase_i = -0.5 * (t1[..., None] * s[:, 0] + t2[..., None] * s[:, 1])
    rel = np.exp(1j * (phase_i[..., :, None] - phase_i[..., None, :]))
    overlap = np.sum(ideal_ph * rel * diag_t, axis=(-2, -1)).real
    tr = np.trace(channel.trace_map()).real
    return (overlap + tr) / (d * (d + 1))


def phase_correct(
    channel: QuantumChannel, ideal: np.ndarray = CZ, grid: int = 64
) -> tuple[QuantumChannel, tuple[float, float]]:
    """Append the local Z rotations that maximise fidelity against ``ideal``.

    Coarse ``grid x grid`` search over [0, 2pi)^2, then Nelder-Mead polish.
    Angles are returned wrapped to (-pi, pi].
    """
    ideal = np.asarray(ideal, dtype=complex)
    if channel.matrix.shape != (16, 16):
        raise ValueError("phase correction is defined for two-qubit channels")
    if not np.allclose(ideal, np.diag(np.diag(ideal))):
        raise ValueError("phase correction expects a diagonal target gate")
    axis = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    mesh = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    vals = _phase_fidelity(channel, ideal, mesh)
    start = mesh[int(np.argmax(vals))]
    if vals.max() < _phase_fidelity(channel, ideal, np.zeros((1, 2)))[0]:
        start = np.zeros(2)
    res = minimize(
        lambda th: -_phase_fidelity(channel, ideal, th[None, :])[0],
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000},
    )
    theta = np.angle(np.exp(1j * res.x))
    theta = np.where(np.isclose(theta, -np.pi), np.pi, theta)
    corrected = compose(channel, unitary_channel(local_z(*theta)))
    corrected.trace_preserving = channel.trace_preserving
    return corrected, (float(theta[0]), float(theta[1]))
