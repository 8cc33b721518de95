from __future__ import annotations

import numpy as np
import pytest

from pseudo2d.fidelity import (
    CZ,
    QuantumChannel,
    avg_gate_fidelity,
    compose,
    depolarizing_channel,
    haar_unitary,
    kraus_channel,
    local_z,
    monte_carlo_fidelity,
    phase_correct,
    random_channel,
    unitary_channel,
)


def test_ideal_cz_has_unit_fidelity():
    assert avg_gate_fidelity(unitary_channel(CZ)) == pytest.approx(1.0, abs=1e-12)


def test_identity_against_cz():
    # process fidelity |Tr CZ|^2 / 16 = 1/4, average (4/4 + 1)/5
    assert avg_gate_fidelity(unitary_channel(np.eye(4))) == pytest.approx(0.4, abs=1e-12)


def test_fully_depolarizing():
    ch = depolarizing_channel(4)
    assert avg_gate_fidelity(ch) == pytest.approx(0.25, abs=1e-12)
    mean, se = monte_carlo_fidelity(ch, samples=4000, rng=1)
    assert abs(mean - 0.25) < 1e-12 + 3 * se


def test_exact_matches_monte_carlo_on_random_channels():
    rng = np.random.default_rng(7)
    for _ in range(5):
        ch = random_channel(4, int(rng.integers(1, 5)), rng)
        exact = avg_gate_fidelity(ch)
        mean, se = monte_carlo_fidelity(ch, samples=10_000, rng=rng)
        assert abs(exact - mean) < 3 * se


def test_leaky_channel_loses_fidelity():
    # amplitude leakage out of |11>: trace-decreasing Kraus map
    k = np.diag([1, 1, 1, np.sqrt(0.8)]).astype(complex) @ CZ
    ch = kraus_channel([k])
    assert not ch.trace_preserving
    assert np.trace(ch.trace_map()).real == pytest.approx(3.8)
    mean, se = monte_carlo_fidelity(ch, samples=10_000, rng=3)
    assert abs(avg_gate_fidelity(ch) - mean) < 3 * se
    assert avg_gate_fidelity(ch) < 1


def test_choi_of_random_channel_is_positive():
    ch = random_channel(4, 3, np.random.default_rng(0))
    evals = np.linalg.eigvalsh(ch.choi())
    assert evals.min() > -1e-10
    assert np.allclose(ch.trace_map(), np.eye(4))


def test_compose_order():
    rng = np.random.default_rng(2)
    u, v = haar_unitary(4, rng), haar_unitary(4, rng)
    both = compose(unitary_channel(u), unitary_channel(v))
    assert np.allclose(both.matrix, unitary_channel(v @ u).matrix)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        avg_gate_fidelity(unitary_channel(np.eye(2)), CZ)


def test_phase_correct_ideal_is_untouched():
    corrected, theta = phase_correct(unitary_channel(CZ))
    assert np.allclose(theta, 0, atol=1e-6)
    assert avg_gate_fidelity(corrected) == pytest.approx(1.0, abs=1e-12)


def test_phase_correct_recovers_inverse_rotation():
    ch = compose(unitary_channel(CZ), unitary_channel(local_z(0.3, -0.7)))
    corrected, theta = phase_correct(ch)
    assert np.allclose(theta, (-0.3, 0.7), atol=1e-3)
    assert avg_gate_fidelity(corrected) == pytest.approx(1.0, abs=1e-9)


def test_phase_correct_never_hurts():
    rng = np.random.default_rng(11)
    for _ in range(5):
        noisy = compose(unitary_channel(CZ), random_channel(4, 1, rng))
        corrected, _ = phase_correct(noisy)
        assert avg_gate_fidelity(corrected) >= avg_gate_fidelity(noisy) - 1e-12


def test_channel_apply_matches_kraus():
    rng = np.random.default_rng(5)
    u = haar_unitary(4, rng)
    psi = haar_unitary(4, rng)[:, 0]
    rho = np.outer(psi, psi.conj())
    out = QuantumChannel(unitary_channel(u).matrix).apply(rho)
    assert np.allclose(out, u @ rho @ u.conj().T)
