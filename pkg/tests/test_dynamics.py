import numpy as np
import pytest
from scipy.linalg import expm

from rstqubit.dynamics import (
    PropagationError,
    TimeGrid,
    bloch_trajectory,
    check_state,
    default_grid,
    ordered_product,
    partial_trace_pair,
    product_state,
    project_computational,
    propagate,
)
from rstqubit.noise import NoiseRealization
from rstqubit.pulse import dc_schedule, drive_schedule, idle_schedule
from rstqubit.spin_model import TWO_PI, build_hamiltonian, eigenstructure, excitations, pair_spec, table1


def test_time_grid():
    g = TimeGrid.covering(10e-9, 3e-9)
    assert g.n_steps == 4 and g.duration == pytest.approx(10e-9)
    assert g.times[-1] == pytest.approx(10e-9)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 0.0, 3)


def test_default_grid_resolution():
    spec = table1("direct4")
    s = dc_schedule(["23"], 20e-9, 5e6)
    g = default_grid(spec, s)
    assert g.duration == pytest.approx(20e-9)
    assert g.n_steps >= 4096


def test_ordered_product_order():
    rng = np.random.default_rng(0)
    mats = rng.standard_normal((5, 3, 3))
    ref = mats[4] @ mats[3] @ mats[2] @ mats[1] @ mats[0]
    assert np.allclose(ordered_product(mats), ref)


def test_constant_hamiltonian_matches_expm():
    spec = table1("direct4")
    T = 7e-9
    prop = propagate(spec, idle_schedule(T), TimeGrid.covering(T, T / 64), frame=False)
    h = build_hamiltonian(spec)
    idx = prop.indices
    ref = expm(-1j * h[np.ix_(idx, idx)] * T)
    assert np.max(np.abs(prop.unitary - ref)) < 1e-9


def test_rotating_frame_phase_matches_lab_frame():
    spec = table1("direct4")
    s = dc_schedule(["23"], 10e-9, 4e6)
    grid = TimeGrid.covering(10e-9, 10e-9 / 8192)
    lab = propagate(spec, s, grid, frame=False)
    rot = propagate(spec, s, grid)
    lifted = np.exp(1j * rot.shift * grid.duration) * rot.unitary
    assert np.max(np.abs(lifted - lab.unitary)) < 1e-6


def test_unitarity_and_dt_convergence():
    spec = pair_spec(table1("direct4"), 1)
    es = eigenstructure(spec)
    w = es.energy("ud") - es.energy("du")
    s = drive_schedule("12", 6 * TWO_PI / w, 1.5e6, w, phase=0.3)
    coarse = propagate(spec, s)
    assert np.max(np.abs(coarse.unitary @ coarse.unitary.conj().T - np.eye(2))) < 1e-8
    fine = propagate(spec, s, TimeGrid.covering(s.total_duration, coarse.grid.dt / 2))
    assert np.max(np.abs(coarse.unitary - fine.unitary)) < 1e-7


def test_full_space_block_structure():
    spec = table1("direct4")
    prop = propagate(spec, dc_schedule(["23"], 5e-9, 2e6), full_space=True)
    u = prop.unitary
    exc = excitations(4)
    mixed = u[np.ix_(exc == 1, exc == 2)]
    assert np.max(np.abs(mixed)) < 1e-12


def test_recorded_states_stay_normalized():
    spec = table1("direct4")
    psi0 = product_state("dudu")
    prop = propagate(spec, dc_schedule(["23"], 5e-9, 2e6), initial=psi0, record=True)
    norms = np.linalg.norm(prop.states, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-10)
    assert np.allclose(prop.states[-1], prop.state)


def test_hyperfine_offset_shifts_frequency():
    spec = pair_spec(table1("direct4"), 1)
    T = 1e-6
    grid = TimeGrid.covering(T, T / 256)
    noise = NoiseRealization({}, np.array([TWO_PI * 1e3, 0.0]))
    a = propagate(spec, idle_schedule(T), grid)
    b = propagate(spec, idle_schedule(T), grid, noise)
    assert np.max(np.abs(a.unitary - b.unitary)) > 1e-3


def test_unitarity_guard_trips_for_huge_steps():
    spec = table1("direct4")
    with pytest.raises(PropagationError):
        from rstqubit import dynamics
        old = dynamics.UNITARITY_TOL
        dynamics.UNITARITY_TOL = -1.0
        try:
            propagate(spec, idle_schedule(1e-9))
        finally:
            dynamics.UNITARITY_TOL = old


def test_project_and_partial_trace():
    spec = table1("direct4")
    es = eigenstructure(spec)
    v = es.computational_vectors()[:, 2]
    reduced, leaked = project_computational(v, es)
    assert leaked < 1e-12
    assert abs(reduced[2]) == pytest.approx(1.0)
    _, leaked = project_computational(product_state("uudd"), es)
    assert leaked > 0.99
    rho = partial_trace_pair(product_state("dudu"), 4, (0, 1))
    assert rho[1, 1].real == pytest.approx(1.0)
    check_state(rho)


def test_check_state_rejects_bad_inputs():
    with pytest.raises(ValueError):
        check_state(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        check_state(np.array([[1.0, 0.1], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        check_state(np.diag([1.5, -0.5]))


def test_bloch_trajectory_of_ground_state_is_north_pole():
    spec = pair_spec(table1("direct4"), 1)
    es = eigenstructure(spec)
    psi = es.computational_vectors()[:, 0]
    T = 20e-9
    prop = propagate(spec, idle_schedule(T), TimeGrid.covering(T, T / 512), initial=psi, record=True,
                     frame=False)
    traj = bloch_trajectory(prop.states, prop.grid.times, spec)
    assert np.allclose(traj.r[:, 2], 1.0, atol=1e-9)
    assert np.allclose(traj.population, 1.0, atol=1e-12)
    assert traj.to_csv().startswith("t_s,r_x,r_y,r_z\n")
