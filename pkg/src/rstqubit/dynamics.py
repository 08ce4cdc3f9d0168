"""Time-ordered propagation of a spin chain under a pulse schedule.

Each time step is integrated with the fourth-order Magnus (two-point
Gauss-Legendre) rule, and every step propagator is the exact exponential of
a Hermitian generator, so the result is unitary to rounding error.

Propagation happens in the frame rotating uniformly at the mean qubit-spin
Larmor frequency.  The total ``S_z`` is conserved, so inside one excitation
sector that frame is a constant energy shift; :class:`Propagation` records
the shift so that callers can return to the lab frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import NoiseRealization
from .pulse import PulseSchedule
from .spin_model import (
    COMPUTATIONAL,
    TWO_PI,
    ChainSpec,
    EigenStructure,
    Topology,
    bond_sites,
    diagonalize_and_label,
    build_hamiltonian,
    excitations,
    exchange_operator,
    label_to_index,
    mean_qubit_larmor,
    pair_spec,
    QUBIT_SITES,
    spin_z_values,
    zeeman_diagonal,
)

UNITARITY_TOL = 1e-6
_GAUSS = np.sqrt(3.0) / 6.0


class PropagationError(RuntimeError):
    """The step propagators drifted away from unitarity; use a smaller ``dt``."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 + k dt`` for ``k = 0 .. n_steps``."""

    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps > 0 and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_points)

    @classmethod
    def covering(cls, duration: float, dt_max: float, t0: float = 0.0) -> "TimeGrid":
        if duration <= 0:
            return cls(t0, max(dt_max, 1e-12), 0)
        n = int(np.ceil(duration / dt_max - 1e-9))
        return cls(t0, duration / n, n)


def default_sector(spec: ChainSpec) -> int:
    """Excitation number of the computational states."""
    return 1 if spec.topology is Topology.PAIR else 2


def max_frequency(spec: ChainSpec, schedule: PulseSchedule, n_up: int | None = None) -> float:
    """Upper bound (Hz) on the rotating-frame frequencies met during ``schedule``."""
    n_up = default_sector(spec) if n_up is None else n_up
    idx = np.flatnonzero(excitations(spec.n_spins) == n_up)
    peaks = schedule.peak_exchange(spec)
    h = build_hamiltonian(spec, peaks)
    block = h[np.ix_(idx, idx)]
    e = np.linalg.eigvalsh(block)
    spread = (e[-1] - e[0]) / TWO_PI if len(e) > 1 else 0.0
    return spread + schedule.max_carrier() / TWO_PI


def default_grid(spec: ChainSpec, schedule: PulseSchedule, n_up: int | None = None,
                 samples_per_period: int = 64, min_steps: int = 4096) -> TimeGrid:
    """``dt = min(1 / (64 f_max), T / 4096)``, adjusted to land exactly on ``T``."""
    T = schedule.total_duration
    f_max = max(max_frequency(spec, schedule, n_up), 1.0)
    dt = min(1.0 / (samples_per_period * f_max), T / min_steps) if T > 0 else 1.0
    return TimeGrid.covering(T, dt)


@dataclass
class Propagation:
    """Result of :func:`propagate`.

    ``unitary`` acts on the basis states ``indices`` (an excitation sector, or
    the full space) in the rotating frame.  ``shift`` is the frame energy
    (rad/s) removed from every state in the sector: ``U_lab = exp(i shift T) U``.
    """

    unitary: np.ndarray
    indices: np.ndarray
    shift: float
    grid: TimeGrid
    state: np.ndarray | None = None
    states: np.ndarray | None = None
    full_space: bool = False

    def embed(self, vector: np.ndarray) -> np.ndarray:
        """Restrict a full-space vector (or matrix of column vectors) to ``indices``."""
        return np.asarray(vector)[self.indices]


class _ChainOperators:
    def __init__(self, spec: ChainSpec, indices: np.ndarray, delta_omega):
        self.spec = spec
        self.idx = indices
        n = spec.n_spins
        sub = np.ix_(indices, indices)
        self.x = {b: exchange_operator(n, *bond_sites(spec, b))[sub] for b in spec.bonds}
        self.zeeman = zeeman_diagonal(spec, delta_omega)[indices]


def _sector_of(initial: np.ndarray, n_spins: int) -> int:
    support = np.flatnonzero(np.abs(initial) > 1e-14)
    sectors = set(excitations(n_spins)[support].tolist())
    if len(sectors) != 1:
        raise ValueError("initial state spans several excitation sectors; use full_space=True")
    return sectors.pop()


def _interp(series: np.ndarray, grid: TimeGrid, t: np.ndarray) -> np.ndarray:
    if grid.n_steps == 0:
        return np.full_like(t, series[0])
    return np.interp(t, grid.times, series)


def step_hamiltonians(spec: ChainSpec, schedule: PulseSchedule, ops: _ChainOperators, t: np.ndarray,
                      grid: TimeGrid, noise: NoiseRealization | None, shift_diag: np.ndarray) -> np.ndarray:
    """Stack of ``H(t) / hbar`` for the times ``t`` (shape ``(len(t), d, d)``)."""
    d = len(ops.idx)
    static = np.diag(ops.zeeman + shift_diag).astype(complex)
    driven = set(schedule.driven_bonds)
    for bond in spec.bonds:
        if bond not in driven and spec.exchange_hz[bond]:
            static = static + TWO_PI * spec.exchange_hz[bond] * ops.x[bond]
    h = np.broadcast_to(static, (len(t), d, d)).copy()
    for bond in driven:
        j = schedule.exchange(spec, bond, t)
        if noise is not None and bond in noise.delta_v:
            j = j * np.exp(2.0 * spec.lever_arm(bond) * _interp(noise.delta_v[bond], grid, t))
        h += (TWO_PI * j)[:, None, None] * ops.x[bond][None]
    return h


def step_propagators(spec: ChainSpec, schedule: PulseSchedule, ops: _ChainOperators, grid: TimeGrid,
                     noise: NoiseRealization | None, shift_diag: np.ndarray) -> np.ndarray:
    t = grid.times[:-1]
    dt = grid.dt
    h1 = step_hamiltonians(spec, schedule, ops, t + dt * (0.5 - _GAUSS), grid, noise, shift_diag)
    h2 = step_hamiltonians(spec, schedule, ops, t + dt * (0.5 + _GAUSS), grid, noise, shift_diag)
    comm = h2 @ h1 - h1 @ h2
    k = 0.5 * dt * (h1 + h2) - 1j * (np.sqrt(3.0) / 12.0) * dt * dt * comm
    k = 0.5 * (k + np.conj(np.swapaxes(k, -1, -2)))
    w, v = np.linalg.eigh(k)
    return (v * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def ordered_product(us: np.ndarray) -> np.ndarray:
    """``U_{n-1} ... U_1 U_0`` by pairwise reduction."""
    if len(us) == 0:
        raise ValueError("empty product")
    while len(us) > 1:
        if len(us) % 2:
            us = np.concatenate([us, np.eye(us.shape[-1], dtype=us.dtype)[None]], axis=0)
        us = us[1::2] @ us[0::2]
    return us[0]


def propagate(spec: ChainSpec, schedule: PulseSchedule, grid: TimeGrid | None = None,
              noise: NoiseRealization | None = None, initial: np.ndarray | None = None, *,
              n_up: int | None = None, full_space: bool = False, record: bool = False,
              frame: bool = True) -> Propagation:
    """Propagate the chain through ``schedule``.

    Parameters
    ----------
    initial : array, optional
        Full-space state vector.  When given, its excitation sector is used
        unless ``full_space`` is set.
    n_up : int, optional
        Excitation sector to propagate (default: the computational sector).
    record : bool
        Keep the state at every grid point (needs ``initial``).
    frame : bool
        Use the uniform rotating frame (``False`` propagates in the lab frame).
    """
    n = spec.n_spins
    if initial is not None:
        initial = np.asarray(initial, dtype=complex)
        if initial.shape != (2**n,):
            raise ValueError(f"initial state must have dimension {2**n}")
    if full_space:
        idx = np.arange(2**n)
    else:
        if n_up is None:
            n_up = _sector_of(initial, n) if initial is not None else default_sector(spec)
        idx = np.flatnonzero(excitations(n) == n_up)
    if grid is None:
        grid = default_grid(spec, schedule, None if full_space else n_up)
    if grid.duration < schedule.total_duration * (1 - 1e-12) - 1e-18:
        raise ValueError("time grid does not cover the schedule")
    omega_ref = mean_qubit_larmor(spec) if frame else 0.0
    sz = spin_z_values(n).sum(axis=1)[idx]
    shift_diag = 0.5 * omega_ref * sz
    shift = float(shift_diag[0]) if not full_space else 0.0
    ops = _ChainOperators(spec, idx, None if noise is None else noise.delta_omega)
    d = len(idx)
    if grid.n_steps == 0:
        us = np.eye(d, dtype=complex)[None]
    else:
        us = step_propagators(spec, schedule, ops, grid, noise, shift_diag)
        drift = np.max(np.abs(us @ np.conj(np.swapaxes(us, -1, -2)) - np.eye(d)))
        if drift > UNITARITY_TOL:
            raise PropagationError(f"step unitarity drift {drift:.2e}; reduce dt")
    u = ordered_product(us)
    result = Propagation(u, idx, shift, grid, full_space=full_space)
    if initial is not None:
        psi = initial[idx]
        if record:
            states = np.empty((grid.n_points, d), dtype=complex)
            states[0] = psi
            cur = psi
            for k in range(grid.n_steps):
                cur = us[k] @ cur
                states[k + 1] = cur
            full = np.zeros((grid.n_points, 2**n), dtype=complex)
            full[:, idx] = states
            result.states = full
        out = np.zeros(2**n, dtype=complex)
        out[idx] = u @ psi
        result.state = out
    return result


# ---------------------------------------------------------------------------
# States, projections and Bloch vectors
# ---------------------------------------------------------------------------


def product_state(label: str) -> np.ndarray:
    vec = np.zeros(2 ** len(label), dtype=complex)
    vec[label_to_index(label)] = 1.0
    return vec


def check_state(state: np.ndarray, tol: float = 1e-9) -> None:
    """Validate a state vector (1-d) or density matrix (2-d)."""
    state = np.asarray(state)
    if state.ndim == 1:
        if abs(np.vdot(state, state).real - 1.0) > tol:
            raise ValueError("state vector is not normalized")
        return
    if np.max(np.abs(state - state.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(state).real - 1.0) > tol:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(state)[0] < -tol:
        raise ValueError("density matrix is not positive semidefinite")


def project_computational(state: np.ndarray, es: EigenStructure) -> tuple[np.ndarray, float]:
    """Project onto the labeled computational eigenstates.

    Returns the renormalized reduced state (vector or density matrix in the
    computational basis) and the leaked probability ``1 - Tr[P rho P]``.
    """
    vc = es.computational_vectors()
    state = np.asarray(state)
    if state.ndim == 1:
        amp = vc.conj().T @ state
        kept = float(np.vdot(amp, amp).real)
        reduced = amp / np.sqrt(kept) if kept > 0 else amp
    else:
        rho = vc.conj().T @ state @ vc
        kept = float(np.trace(rho).real)
        reduced = rho / kept if kept > 0 else rho
    return reduced, max(0.0, 1.0 - kept)


def partial_trace_pair(state: np.ndarray, n_spins: int, keep: tuple[int, int]) -> np.ndarray:
    """Reduced 4x4 density matrix of two sites from a pure state."""
    psi = np.asarray(state).reshape((2,) * n_spins)
    rest = [k for k in range(n_spins) if k not in keep]
    psi = np.transpose(psi, list(keep) + rest).reshape(4, -1)
    return psi @ psi.conj().T


PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class BlochTrajectory:
    times: np.ndarray
    r: np.ndarray
    population: np.ndarray

    def to_csv(self) -> str:
        lines = ["t_s,r_x,r_y,r_z"]
        for t, (x, y, z) in zip(self.times, self.r):
            lines.append(f"{t:.12e},{x:.12e},{y:.12e},{z:.12e}")
        return "\n".join(lines) + "\n"


def qubit_eigenvectors(spec: ChainSpec, qubit: int = 1) -> np.ndarray:
    """4x2 matrix of the isolated pair's |0>, |1> eigenvectors in the pair product basis."""
    pair = spec if spec.topology is Topology.PAIR else pair_spec(spec, qubit)
    es = diagonalize_and_label(build_hamiltonian(pair), pair)
    return es.computational_vectors()


def bloch_trajectory(states: np.ndarray, times: np.ndarray, spec: ChainSpec, qubit: int = 1,
                     omega_frame: float | None = None) -> BlochTrajectory:
    """Bloch vector of one RST qubit along a trajectory of full-space states.

    The complementary spins are traced out, the pair density matrix is
    expressed in the pair eigenbasis {|0>, |1>}, and rotated into the frame
    co-rotating at ``omega_frame`` (default: the isolated qubit frequency).
    ``r_z = +1`` for |0>.
    """
    sites = ("1", "2") if spec.topology is Topology.PAIR else QUBIT_SITES[qubit]
    keep = (spec.site_index(sites[0]), spec.site_index(sites[1]))
    vq = qubit_eigenvectors(spec, qubit)
    if omega_frame is None:
        pair = spec if spec.topology is Topology.PAIR else pair_spec(spec, qubit)
        f = pair.larmor_hz
        omega_frame = float(np.hypot(TWO_PI * (f[0] - f[1]), TWO_PI * pair.exchange_hz["12"]))
    r = np.empty((len(times), 3))
    pop = np.empty(len(times))
    for k, (psi, t) in enumerate(zip(states, times)):
        rho = partial_trace_pair(psi, spec.n_spins, keep)
        rq = vq.conj().T @ rho @ vq
        phase = np.exp(-0.5j * omega_frame * t)
        u = np.diag([phase, np.conj(phase)])
        rq = u @ rq @ u.conj().T
        r[k] = [np.trace(rq @ PAULI[a]).real for a in "xyz"]
        pop[k] = np.trace(rq).real
    return BlochTrajectory(np.asarray(times), r, pop)


def computational_labels(spec: ChainSpec) -> tuple[str, ...]:
    return COMPUTATIONAL[spec.topology]
