"""Gate operators in the qubit frame, ideal targets and Monte Carlo gate runs.

A propagated chain unitary is turned into a logical gate in three steps:
restrict it to the dressed computational states of the noise-free chain,
remove the free precession of each qubit (the independent-qubit frame of
:func:`~rstqubit.spin_model.frame_energies`, which leaves the ZZ phase in place)
and apply the schedule's virtual-Z frame updates.  The result is a
``2^n x 2^n`` matrix that is unitary up to leakage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import Propagation, TimeGrid, default_grid, propagate
from .noise import ChargeNoiseSpec, HyperfineSpec, NoiseRealization, make_realization
from .pulse import PulseSchedule, VirtualZ
from .spin_model import ChainSpec, EigenStructure, Topology, eigenstructure, frame_energies

SQRT_X = np.array([[1, -1j], [-1j, 1]], dtype=complex) / np.sqrt(2)
IDENTITY2 = np.eye(2, dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def z_rotation(angle: float) -> np.ndarray:
    """``Z(angle) = exp(-i angle sigma_z / 2)`` in the basis |0>, |1>."""
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def x_rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rotation(theta: float, phi: float) -> np.ndarray:
    """``R(theta, phi) = Z(-phi) X(theta) Z(phi)``: rotation about ``(cos phi, -sin phi, 0)``.

    This is the rotation produced by a drive tone with carrier phase ``phi``.
    """
    return z_rotation(-phi) @ x_rotation(theta) @ z_rotation(phi)


def on_qubit(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator; qubit 1 is the most significant factor."""
    if n_qubits == 1:
        return op
    return np.kron(op, IDENTITY2) if qubit == 1 else np.kron(IDENTITY2, op)


def virtual_z_operator(zs: Sequence[VirtualZ], n_qubits: int) -> np.ndarray:
    out = np.eye(2**n_qubits, dtype=complex)
    for z in zs:
        out = on_qubit(z_rotation(z.angle), z.qubit, n_qubits) @ out
    return out


def ideal_x90(spec: ChainSpec, qubit: int = 1, phi: float = 0.0) -> np.ndarray:
    return on_qubit(rotation(np.pi / 2, phi), qubit, spec.n_qubits)


def ideal_cz() -> np.ndarray:
    return CZ.copy()


def qubit_frame_matrix(prop: Propagation, es: EigenStructure) -> np.ndarray:
    """Propagator on the computational states with the free qubit precession removed."""
    vc = es.computational_vectors()[prop.indices]
    block = vc.conj().T @ prop.unitary @ vc
    T = prop.grid.duration
    phases = np.exp(1j * (frame_energies(es) + prop.shift) * T)
    return phases[:, None] * block


def gate_operator(prop: Propagation, es: EigenStructure, schedule: PulseSchedule) -> np.ndarray:
    """Logical gate: post-frame updates, frame-corrected block, pre-frame updates."""
    n_qubits = 1 if es.topology is Topology.PAIR else 2
    pre = virtual_z_operator(schedule.z_before(), n_qubits)
    post = virtual_z_operator(schedule.z_after(), n_qubits)
    return post @ qubit_frame_matrix(prop, es) @ pre


def euler_zxz(u: np.ndarray) -> tuple[float, float, float]:
    """Angles ``(a, beta, c)`` with ``u ~ Z(a) X(beta) Z(c)`` up to a global phase.

    Works for slightly non-unitary blocks (the moduli only enter ``beta``).
    """
    a_plus_c = float(np.angle(u[1, 1] / u[0, 0])) if abs(u[0, 0]) > 1e-14 else 0.0
    a_minus_c = float(np.angle(u[1, 0] / u[0, 1])) if abs(u[0, 1]) > 1e-14 else 0.0
    beta = 2.0 * float(np.arctan2(abs(u[0, 1]) + abs(u[1, 0]), abs(u[0, 0]) + abs(u[1, 1])))
    a, c = 0.5 * (a_plus_c + a_minus_c), 0.5 * (a_plus_c - a_minus_c)
    # Halving the wrapped sums leaves a joint pi shift of (a, c) undetermined;
    # that shift flips the sign of beta, so keep the branch that reproduces u.
    best = None
    for cand in ((a, c), (a + np.pi, c + np.pi)):
        v = z_rotation(cand[0]) @ x_rotation(beta) @ z_rotation(cand[1])
        score = abs(np.trace(v.conj().T @ u))
        if best is None or score > best[0] + 1e-15:
            best = (score, cand)
    a, c = (float(np.angle(np.exp(1j * x))) for x in best[1])
    return a, beta, c


def conditional_phase(g: np.ndarray) -> float:
    """``arg U00 + arg U11 - arg U01 - arg U10`` wrapped to ``(-pi, pi]``."""
    d = np.diag(g)
    value = np.angle(d[0] * d[3] / (d[1] * d[2]))
    return float(value)


def spectator_block(g: np.ndarray, qubit: int, spectator_state: int = 0) -> np.ndarray:
    """2x2 block of a two-qubit gate acting on ``qubit`` with the other qubit fixed."""
    if g.shape == (2, 2):
        return g
    if qubit == 1:
        idx = [spectator_state, 2 + spectator_state]
    else:
        idx = [2 * spectator_state, 2 * spectator_state + 1]
    return g[np.ix_(idx, idx)]


# ---------------------------------------------------------------------------
# Monte Carlo gate runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseConfig:
    """Which noise channels are switched on for a run."""

    charge: ChargeNoiseSpec | None = None
    hyperfine: HyperfineSpec | None = None

    @property
    def noiseless(self) -> bool:
        return self.charge is None and self.hyperfine is None

    @property
    def name(self) -> str:
        if self.noiseless:
            return "coherent"
        if self.charge is not None and self.hyperfine is not None:
            return "both"
        return "charge" if self.charge is not None else "hyperfine"


class GateRunner:
    """Reusable propagation context for one schedule on one chain.

    The eigenstructure and time grid are computed once; :meth:`gate` returns
    the logical gate for one noise realization index.
    """

    def __init__(self, spec: ChainSpec, schedule: PulseSchedule, grid: TimeGrid | None = None,
                 es: EigenStructure | None = None):
        self.spec = spec
        self.schedule = schedule
        self.es = es if es is not None else eigenstructure(spec)
        self.grid = grid if grid is not None else default_grid(spec, schedule)

    def realization(self, noise: NoiseConfig, master_seed: int, index: int) -> NoiseRealization | None:
        if noise.noiseless:
            return None
        return make_realization(master_seed, index, n_spins=self.spec.n_spins,
                                bonds=self.schedule.driven_bonds, n_points=self.grid.n_points,
                                dt=self.grid.dt, charge=noise.charge, hyperfine=noise.hyperfine)

    def gate(self, noise: NoiseConfig | None = None, master_seed: int = 0, index: int = 0) -> np.ndarray:
        real = None if noise is None else self.realization(noise, master_seed, index)
        prop = propagate(self.spec, self.schedule, self.grid, real)
        return gate_operator(prop, self.es, self.schedule)
