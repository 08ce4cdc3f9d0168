import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from rstqubit.metrics import (
    FitError,
    average_fidelity,
    entanglement_fidelity,
    fiducials,
    fit_omega,
    fit_ramsey,
    gate_error,
    leakage,
    ramsey_model,
    ramsey_signal,
    ramsey_t2star,
)
from rstqubit.noise import HyperfineSpec, MonteCarloPlan
from rstqubit.gates import z_rotation


def test_fiducial_sets():
    assert len(fiducials(1)) == 4 and len(fiducials(2)) == 16
    for rho in fiducials(2).states:
        assert np.trace(rho).real == pytest.approx(1.0)
        assert np.allclose(rho @ rho, rho)
    with pytest.raises(ValueError):
        fiducials(3)


@pytest.mark.parametrize("n", [1, 2])
def test_ideal_gate_has_unit_fidelity(n):
    u = unitary_group.rvs(2**n, random_state=1)
    assert entanglement_fidelity(u, u) == pytest.approx(1.0, abs=1e-14)
    assert gate_error(u, u) == pytest.approx(0.0, abs=1e-14)
    assert leakage(u) == pytest.approx(0.0, abs=1e-14)


def test_small_z_error_closed_form():
    eps = 0.01
    # |0>, |1> are untouched; |+>, |+i> overlap cos^2(eps / 2).
    f_e = entanglement_fidelity(z_rotation(eps), np.eye(2))
    assert f_e == pytest.approx((2 + 2 * np.cos(eps / 2) ** 2) / 4, rel=1e-14)
    assert gate_error(z_rotation(eps), np.eye(2)) == pytest.approx(1 - (2 * f_e + 1) / 3, rel=1e-12)


def test_states_and_matrix_inputs_agree():
    u = unitary_group.rvs(4, random_state=2)
    w = unitary_group.rvs(4, random_state=3)
    outs = [u @ rho @ u.conj().T for rho in fiducials(2).states]
    assert entanglement_fidelity(outs, w) == pytest.approx(entanglement_fidelity(u, w), rel=1e-13)
    with pytest.raises(ValueError):
        entanglement_fidelity(outs[:3], w)
    with pytest.raises(ValueError):
        entanglement_fidelity(np.eye(2), w)


def test_leakage_lowers_fidelity():
    g = np.sqrt(0.99) * np.eye(2)
    assert leakage(g) == pytest.approx(0.01)
    assert entanglement_fidelity(g, np.eye(2)) == pytest.approx(0.99)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2]))
def test_property_bounds_affine_and_invariance(seed, n):
    d = 2**n
    u = unitary_group.rvs(d, random_state=seed)
    w = unitary_group.rvs(d, random_state=seed + 1)
    f_e = entanglement_fidelity(u, w)
    assert -1e-12 <= f_e <= 1 + 1e-12
    f_g = average_fidelity(f_e, n)
    assert f_g == pytest.approx((d * f_e + 1) / (d + 1))
    assert 1 / (d + 1) - 1e-12 <= f_g <= 1 + 1e-12
    # Invariance under a common left rotation by a product of local phases.
    v = np.diag(np.exp(1j * np.linspace(0.1, 1.0, d)))
    assert entanglement_fidelity(v @ u, v @ w) == pytest.approx(f_e, abs=1e-12)
    assert entanglement_fidelity(np.exp(0.7j) * u, w) == pytest.approx(f_e, abs=1e-12)


def test_fit_recovers_synthetic_parameters():
    t = np.linspace(0, 8e-6, 401)
    truth = (0.5, 3.1e-6, 1.0e6, 0.2, 0.5)
    fit = fit_ramsey(t, ramsey_model(t, *truth))
    assert fit.t2star == pytest.approx(truth[1], rel=1e-6)
    assert fit.frequency == pytest.approx(truth[2], rel=1e-6)
    assert fit.amplitude == pytest.approx(truth[0], rel=1e-6)
    assert fit.phase == pytest.approx(truth[3], abs=1e-6)
    assert fit.residual < 1e-9
    assert not fit.bounded_by_window


def test_fit_flags_window_limited_decay():
    t = np.linspace(0, 1e-6, 201)
    fit = fit_ramsey(t, ramsey_model(t, 0.5, 20e-6, 5e6, 0.0, 0.5))
    assert fit.bounded_by_window


def test_fit_rejects_short_input():
    with pytest.raises(ValueError):
        fit_ramsey([0, 1, 2], [0, 1, 0])
    assert issubclass(FitError, RuntimeError)


def test_ramsey_signal_limits():
    t = np.linspace(0, 1e-6, 11)
    p = ramsey_signal(t, np.array([0.0]), detuning=1e6)[:, 0]
    assert p[0] == pytest.approx(1.0)
    assert p[5] == pytest.approx(0.0, abs=1e-15)


def test_ramsey_t2star_gaussian_limit():
    # Quasi-static offsets kappa * N(0, sigma^2) give exp(-(kappa sigma t)^2 / 2):
    # T2* = sqrt(2) / (kappa sigma) for kappa = 2.
    sigma = 2 * np.pi * 0.05e6
    delays = np.linspace(0, 8e-6 * 0.8, 401)
    fit = ramsey_t2star(HyperfineSpec(sigma), delays, MonteCarloPlan(4000, 1))
    assert fit.t2star == pytest.approx(np.sqrt(2) / (2 * sigma), rel=0.05)


def test_fit_omega_exact_for_proportional_data():
    sigmas = np.array([0.01e6, 0.05e6, 0.1e6])
    assert fit_omega(sigmas, 0.106 / sigmas) == pytest.approx(0.106, rel=1e-14)
