"""Closed-form results used to cross-check the numerical stack.

All angular quantities are in rad/s and all exchanges passed to the ZZ
formulas are ``J / h`` in Hz (the result is then ``zeta / h`` in Hz).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .spin_model import TWO_PI, ChainSpec, Topology

PI2 = np.pi**2


class NearResonanceError(ValueError):
    """A perturbative denominator is (numerically) zero."""


@dataclass(frozen=True)
class QubitFrameParams:
    """Single RST-qubit drive in the qubit eigenframe.

    ``j_d`` is the drive amplitude ``J_d / hbar`` in rad/s.
    """

    omega_q: float
    theta_mix: float
    j_d: float
    omega_d: float
    phi: float
    tau: float

    @classmethod
    def from_pair(cls, delta_omega: float, j_residual: float, j_d: float, omega_d: float | None,
                  phi: float, tau: float) -> "QubitFrameParams":
        """Build from the pair detuning and residual exchange (both rad/s)."""
        omega_q = float(np.hypot(delta_omega, j_residual))
        theta = float(np.arctan2(j_residual, abs(delta_omega)))
        return cls(omega_q, theta, j_d, omega_q if omega_d is None else omega_d, phi, tau)

    @property
    def cos_theta(self) -> float:
        return float(np.cos(self.theta_mix))

    @property
    def sin_theta(self) -> float:
        return float(np.sin(self.theta_mix))


def _check(p: QubitFrameParams):
    vals = [p.omega_q, p.theta_mix, p.j_d, p.omega_d, p.phi, p.tau]
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite drive parameters")
    if p.omega_d <= 0 or p.tau <= 0:
        raise ValueError("omega_d and tau must be positive")


def _h(y: float) -> complex:
    # (1 - e^{-iy}) / (4 pi^2 - y^2), finite through y = 2 pi.
    return np.exp(-0.5j * y) * 1j * np.sinc((TWO_PI - y) / TWO_PI) / (TWO_PI + y)


def error_integrals(p: QubitFrameParams) -> tuple[complex, float]:
    """Closed-form ``I_x`` (complex) and ``I_z`` (real) of a cosine-envelope drive.

    The expressions are rewritten with sinc factors so that the removable
    singularities at ``omega_d tau = pi, 2 pi`` evaluate to their limits.
    """
    _check(p)
    x = p.omega_d * p.tau
    w = p.omega_d
    # (1 - e^{-ix}) / (16 i w) * 16 / (4pi^2 - x^2)
    first = _h(x) / (1j * w)
    # (1 - e^{-ix})(1 + e^{-ix}) / (pi^2 - x^2) = 4 (1 - e^{-2ix}) / (4pi^2 - 4x^2)
    second = np.exp(-1j * p.phi) * 4.0 * _h(2 * x) / (16j * w)
    i_x = PI2 * p.j_d * p.cos_theta * (first + second)
    ratio = np.cos(p.phi + 0.5 * x) * np.sinc((TWO_PI - x) / TWO_PI) / (TWO_PI + x)
    i_z = PI2 * p.j_d * p.sin_theta / w * (x / (4 * PI2) + ratio)
    return complex(i_x), float(i_z)


def error_integrals_printed(p: QubitFrameParams) -> tuple[complex, float]:
    """The same integrals evaluated literally (singular at the poles)."""
    x = p.omega_d * p.tau
    w = p.omega_d
    e = np.exp(-1j * x)
    i_x = (PI2 * p.j_d * p.cos_theta * (1 - e) / (16j * w)) * (
        np.exp(-1j * p.phi) * (1 + e) / (PI2 - x**2) + 16.0 / (4 * PI2 - x**2)
    )
    i_z = (PI2 * p.j_d * p.sin_theta / w) * (
        x / (4 * PI2) + (np.sin(x + p.phi) - np.sin(p.phi)) / (4 * PI2 - x**2)
    )
    return complex(i_x), float(i_z)


def error_integrands(p: QubitFrameParams, t):
    """``epsilon_x(t) / hbar`` and ``epsilon_z(t) / hbar`` (rad/s)."""
    t = np.asarray(t, dtype=float)
    s = 0.5 - 0.5 * np.cos(TWO_PI * t / p.tau)
    w = p.omega_d
    ex = 0.25 * p.j_d * s * p.cos_theta * (2 * np.exp(-1j * w * t) + np.exp(-1j * (2 * w * t + p.phi)))
    ez = 0.5 * p.j_d * s * p.sin_theta * (1 + np.cos(w * t + p.phi))
    return ex, ez


def rotation_angles(p: QubitFrameParams) -> tuple[float, float, float]:
    i_x, i_z = error_integrals(p)
    base = 0.25 * p.j_d * p.tau * p.cos_theta
    theta1 = base * np.cos(p.phi) + 2 * i_x.real
    theta2 = -base * np.sin(p.phi) - 2 * i_x.imag
    theta3 = -2 * i_z
    return float(theta1), float(theta2), float(theta3)


def magnus_u0(p: QubitFrameParams) -> np.ndarray:
    """Zeroth-order Magnus propagator in the qubit rotating frame (basis |0>, |1>)."""
    t1, t2, t3 = rotation_angles(p)
    theta = float(np.sqrt(t1 * t1 + t2 * t2 + t3 * t3))
    if theta == 0.0:
        return np.eye(2, dtype=complex)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2) / theta
    return np.array(
        [[c - 1j * t3 * s, -(t2 + 1j * t1) * s], [(t2 - 1j * t1) * s, c + 1j * t3 * s]],
        dtype=complex,
    )


def zz_direct_perturbative(spec: ChainSpec) -> float:
    """First-order residual ZZ of the direct chain, ``-J_23`` (Hz)."""
    if spec.topology is not Topology.DIRECT4:
        raise ValueError("direct-coupling ZZ needs the four-spin chain")
    return -spec.exchange_hz["23"]


class CouplerMode(str, enum.Enum):
    FULL = "full"
    LARGE_DETUNING = "large_detuning"


def zz_coupler_perturbative(spec: ChainSpec, mode: CouplerMode | str = CouplerMode.FULL,
                            exchange_override: dict | None = None) -> float:
    """Second-order coupler-mediated ZZ (Hz).

    ``FULL`` is the complete second-order expression with signed detunings
    ``Delta_kc = f_k - f_c``; ``LARGE_DETUNING`` its leading term
    ``-(J2c J3c / 4)(J2c / Delta_2c^2 + J3c / Delta_3c^2)`` with detunings in
    Hz as well (so the ``hbar^2`` and ``2pi`` factors cancel).
    """
    if spec.topology is not Topology.COUPLER5:
        raise ValueError("coupler ZZ needs the five-spin chain")
    j = dict(spec.exchange_hz)
    if exchange_override:
        j.update(exchange_override)
    f = dict(zip(spec.sites, spec.larmor_hz))
    d2 = f["2"] - f["c"]
    d3 = f["3"] - f["c"]
    j2, j3 = j["2c"], j["3c"]
    if CouplerMode(mode) is CouplerMode.LARGE_DETUNING:
        if d2 == 0 or d3 == 0:
            raise NearResonanceError("coupler resonant with a qubit spin")
        return -(j2 * j3 / 4.0) * (j2 / d2**2 + j3 / d3**2)
    denoms = [
        2 * d2 + j3 - j["12"],
        2 * d2 - j3 - j["12"],
        2 * d3 + j2 - j["34"],
        2 * d3 - j2 - j["34"],
    ]
    scale = max(abs(d2), abs(d3), j2, j3, 1.0)
    if min(abs(x) for x in denoms) < 1e-6 * scale:
        raise NearResonanceError("second-order denominator vanishes")
    return (j2**2 / 2.0) * (1 / denoms[0] - 1 / denoms[1]) + (j3**2 / 2.0) * (
        1 / denoms[2] - 1 / denoms[3]
    )
