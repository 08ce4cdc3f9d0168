"""Calibration of commensurate X(pi/2) drives and cosine-envelope CZ pulses.

Both calibrations start from a closed-form seed and can optionally be refined
against noise-free propagation.  Frame corrections are returned as virtual-Z
updates inside the schedule: ``time = 0`` entries act before the pulse,
``time = total_duration`` entries after it.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .dynamics import default_grid, propagate
from .gates import conditional_phase, euler_zxz, gate_operator, spectator_block
from .oracles import QubitFrameParams, error_integrals
from .pulse import (
    MAX_EXPONENT,
    EnvelopeSpec,
    PulseError,
    PulseSchedule,
    Segment,
    VirtualZ,
    commensurate_width,
    drive_schedule,
)
from .spin_model import (
    QUBIT_BONDS,
    TWO_PI,
    ChainSpec,
    Topology,
    eigenstructure,
    frame_energies,
    pair_spec,
    qubit_frequency,
    tau_cz,
    track_computational,
)

MAX_ITER = 50


class CalibrationError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def _isolated_pair(spec: ChainSpec, qubit: int) -> ChainSpec:
    if spec.topology is Topology.PAIR:
        if qubit != 1:
            raise ValueError("a pair chain has only qubit 1")
        return spec
    if qubit not in (1, 2):
        raise ValueError(f"no qubit {qubit}")
    return pair_spec(spec, qubit)


def drive_bond(spec: ChainSpec, qubit: int) -> str:
    return "12" if spec.topology is Topology.PAIR else QUBIT_BONDS[qubit]


def frame_params(spec: ChainSpec, qubit: int, width: float, amplitude: float, carrier: float,
                 phi: float = 0.0) -> QubitFrameParams:
    """Qubit-frame drive parameters of the isolated pair (``amplitude`` in Hz)."""
    pair = _isolated_pair(spec, qubit)
    f1, f2 = pair.larmor_hz
    return QubitFrameParams.from_pair(TWO_PI * (f1 - f2), TWO_PI * pair.exchange_hz["12"],
                                      TWO_PI * amplitude, carrier, phi, width)


def x90_seed(spec: ChainSpec, qubit: int, width: float) -> float:
    """Seed amplitude ``J_d / h = 1 / (tau cos Theta)`` (Hz)."""
    p = frame_params(spec, qubit, width, 1.0, 1.0)
    return 1.0 / (width * p.cos_theta)


def commensurate_frame_correction(p: QubitFrameParams) -> tuple[float, float, float]:
    """Euler angles of the zeroth-order propagator with ``I_x`` set to zero.

    At commensurate widths this is the full zeroth-order result; elsewhere it
    is the correction a calibration that assumes commensurability applies.
    """
    _, i_z = error_integrals(p)
    base = 0.25 * p.j_d * p.tau * p.cos_theta
    t1 = base * np.cos(p.phi)
    t2 = -base * np.sin(p.phi)
    t3 = -2.0 * i_z
    theta = np.sqrt(t1 * t1 + t2 * t2 + t3 * t3)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2) / theta if theta else 0.5
    u = np.array([[c - 1j * t3 * s, -(t2 + 1j * t1) * s], [(t2 - 1j * t1) * s, c + 1j * t3 * s]])
    return euler_zxz(u)


def _with_rotation_frame(schedule: PulseSchedule, qubit: int, a: float, c: float, phi: float) -> PulseSchedule:
    # Z(-phi - a) U Z(phi - c) = Z(-phi) X(beta) Z(phi) for U = Z(a) X(beta) Z(c).
    zs = (VirtualZ(qubit, phi - c, 0.0), VirtualZ(qubit, -phi - a, schedule.total_duration))
    return schedule.with_virtual_z(zs)


def x90_block(spec: ChainSpec, schedule: PulseSchedule, qubit: int, es=None) -> np.ndarray:
    """Noise-free 2x2 qubit-frame block of ``qubit`` (spectator in |0>), frame updates excluded."""
    es = es if es is not None else eigenstructure(spec)
    prop = propagate(spec, schedule, default_grid(spec, schedule))
    g = gate_operator(prop, es, schedule.with_virtual_z(()))
    return spectator_block(g, qubit, 0)


def calibrate_x90(spec: ChainSpec, qubit: int = 1, n: float = 6, refine: bool = False,
                  phi: float = 0.0, width: float | None = None, tol: float = 1e-6) -> PulseSchedule:
    """Schedule implementing ``R(pi/2, phi)`` on ``qubit``.

    Parameters
    ----------
    n : int
        Width in Larmor periods, ``tau = n 2pi / omega_d``.  Must be a
        positive integer unless ``width`` is given explicitly.
    refine : bool
        Root-find the amplitude so the simulated rotation angle is ``pi/2``
        within ``tol`` and take the frame updates from the simulated gate.
    width : float, optional
        Explicit pulse width (s) overriding ``n``, used for width sweeps.

    The carrier is the dressed qubit frequency with the other qubit in |0>,
    the carrier phase is zero and ``phi`` is realized by virtual-Z updates.
    """
    es = eigenstructure(spec)
    omega_d = qubit_frequency(es, qubit)
    tau = commensurate_width(n, omega_d) if width is None else float(width)
    if not tau > 0:
        raise PulseError("pulse width must be positive")
    bond = drive_bond(spec, qubit)
    seed = x90_seed(spec, qubit, tau)
    p = frame_params(spec, qubit, tau, seed, omega_d)
    i_x, i_z = error_integrals(p)
    a, _, c = commensurate_frame_correction(p)
    meta = {"gate": "x90", "qubit": qubit, "n": n, "seed_hz": seed, "i_z": i_z,
            "i_x_abs": abs(i_x), "refined": bool(refine)}
    schedule = drive_schedule(bond, tau, seed, omega_d, **meta)
    if refine:
        def beta_error(amp):
            block = x90_block(spec, replace(schedule, segments=_rescaled(schedule, amp)), qubit, es)
            return euler_zxz(block)[1] - np.pi / 2

        lo, hi = _bracket(beta_error, seed, (0.8, 1.25, 1.5, 2.0))
        amp, info = brentq(beta_error, lo, hi, xtol=1e-12 * seed, maxiter=MAX_ITER, full_output=True)
        schedule = replace(schedule, segments=_rescaled(schedule, amp))
        block = x90_block(spec, schedule, qubit, es)
        a, beta, c = euler_zxz(block)
        if not info.converged or abs(beta - np.pi / 2) > tol:
            raise CalibrationError("x90 refinement did not converge", abs(beta - np.pi / 2))
        schedule = replace(schedule, meta={**schedule.meta, "amplitude_hz": amp, "iterations": info.iterations})
    else:
        schedule = replace(schedule, meta={**schedule.meta, "amplitude_hz": seed})
    return _with_rotation_frame(schedule, qubit, a, c, phi)


def isolated_x90(spec: ChainSpec, qubit: int = 1, n: float = 6, refine: bool = False,
                 phi: float = 0.0, width: float | None = None, tol: float = 1e-6) -> PulseSchedule:
    """``R(pi/2, phi)`` calibrated on the isolated pair of ``qubit`` and placed in ``spec``.

    Carrier, amplitude and frame updates ignore the rest of the chain, so the
    residual ZZ-interaction with the other qubit stays uncompensated.  This is
    the crosstalk setting; :func:`calibrate_x90` on the chain instead absorbs
    the frequency shift seen with the other qubit in |0>.
    """
    pair = _isolated_pair(spec, qubit)
    sch = calibrate_x90(pair, 1, n, refine=refine, phi=phi, width=width, tol=tol)
    bond = drive_bond(spec, qubit)
    segs = tuple(replace(s, bond=bond) for s in sch.segments)
    zs = tuple(replace(z, qubit=qubit) for z in sch.virtual_z)
    return replace(sch, segments=segs, virtual_z=zs, meta={**sch.meta, "qubit": qubit, "reference": "pair"})


def _bracket(f, seed: float, factors) -> tuple[float, float]:
    """First sign change of ``f`` on ``seed * factors`` (the rotation angle grows with amplitude)."""
    xs = [factors[0] * seed]
    values = [f(xs[0])]
    for k in factors[1:]:
        xs.append(k * seed)
        values.append(f(xs[-1]))
        if values[-2] * values[-1] <= 0:
            return xs[-2], xs[-1]
    raise CalibrationError("rotation angle pi/2 not reachable with this pulse width",
                           float(min(abs(v) for v in values)))


def _rescaled(schedule: PulseSchedule, amplitude: float) -> tuple[Segment, ...]:
    return tuple(replace(s, tone=replace(s.tone, amplitude=amplitude)) if s.tone is not None else s
                 for s in schedule.segments)


# ---------------------------------------------------------------------------
# CZ
# ---------------------------------------------------------------------------


def cz_bonds(spec: ChainSpec) -> tuple[str, ...]:
    if spec.topology is Topology.DIRECT4:
        return ("23",)
    if spec.topology is Topology.COUPLER5:
        return ("2c", "3c")
    raise ValueError("a CZ gate needs a two-qubit chain")


def _levels(spec: ChainSpec, bonds, peak: float, n_levels: int):
    """Instantaneous ZZ and frame-relative energies on a grid of pulse levels."""
    levels = np.linspace(0.0, peak, n_levels)
    local, _ = track_computational(spec, [{b: spec.exchange_hz[b] + lv for b in bonds} for lv in levels])
    zz = local[:, 3] + local[:, 0] - local[:, 1] - local[:, 2]
    return levels, zz, local


def _adiabatic_phase(spec, bonds, width, peak, n_levels=65, n_time=2049):
    levels, zz, energies = _levels(spec, bonds, peak, n_levels)
    t = np.linspace(0.0, width, n_time)
    s = 0.5 - 0.5 * np.cos(TWO_PI * t / width)
    zz_t = np.interp(s * peak, levels, zz)
    e_t = np.stack([np.interp(s * peak, levels, energies[:, k]) for k in range(4)], axis=1)
    return trapezoid(zz_t, t), trapezoid(e_t, t, axis=0)


def cz_seed(spec: ChainSpec, width: float, bonds=None) -> float:
    """Peak pulse level (Hz) with ``|integral zeta(J(t)) dt| = pi`` (adiabatic estimate)."""
    bonds = cz_bonds(spec) if bonds is None else bonds

    def residual(peak):
        return abs(_adiabatic_phase(spec, bonds, width, peak, n_levels=33, n_time=1025)[0]) - np.pi

    hi = 1e6
    while residual(hi) < 0:
        hi *= 2
        jr = min(spec.exchange_hz[b] for b in bonds) or 1.0
        if np.log((hi + jr) / jr) > MAX_EXPONENT:
            raise PulseError("required CZ exchange exceeds the voltage overflow guard")
    return brentq(residual, 0.0 if residual(0.0) < 0 else hi / 2, hi, xtol=1.0)


def _local_z(phases: np.ndarray, T: float) -> tuple[VirtualZ, VirtualZ]:
    # Z1(a) Z2(b) with a = p00 - p10, b = p00 - p01 leaves diag(1, 1, 1, e^{i cphase}) up to a global phase.
    p00, p01, p10, _ = phases
    return VirtualZ(1, float(p00 - p10), T), VirtualZ(2, float(p00 - p01), T)


def cz_schedule(spec: ChainSpec, width: float, peak: float, **meta) -> PulseSchedule:
    bonds = cz_bonds(spec)
    segs = tuple(Segment(b, 0.0, EnvelopeSpec(width), None, peak) for b in bonds)
    return PulseSchedule(segs, (), meta={"gate": "cz", **meta})


def calibrate_cz(spec: ChainSpec, n: float = 4, refine: bool = False, width: float | None = None,
                 tol: float = 1e-4) -> PulseSchedule:
    """Cosine-envelope CZ of width ``n tau_CZ`` with local frame corrections.

    The seed solves the adiabatic ZZ-phase condition.  With ``refine`` the
    peak level is root-found on the simulated conditional phase (to ``tol``
    rad) and the local virtual-Z phases are read off the simulated diagonal;
    without it they come from the adiabatic energy integrals.
    """
    es = eigenstructure(spec)
    tau = n * tau_cz(es) if width is None else float(width)
    if not tau > 0:
        raise PulseError("pulse width must be positive")
    bonds = cz_bonds(spec)
    peak = cz_seed(spec, tau, bonds)
    meta = {"n": n, "tau_cz": tau_cz(es), "seed_hz": peak, "refined": bool(refine)}
    if refine:
        def sim(level):
            sch = cz_schedule(spec, tau, level)
            prop = propagate(spec, sch, default_grid(spec, sch))
            return gate_operator(prop, es, sch)

        def err(level):
            return np.angle(np.exp(1j * (conditional_phase(sim(level)) - np.pi)))

        lo, hi = 0.9 * peak, 1.1 * peak
        f_lo, f_hi = err(lo), err(hi)
        grow = 0
        while f_lo * f_hi > 0 and grow < 6:
            lo, hi = 0.8 * lo, 1.2 * hi
            f_lo, f_hi = err(lo), err(hi)
            grow += 1
        if f_lo * f_hi > 0:
            raise CalibrationError("conditional phase not bracketed", min(abs(f_lo), abs(f_hi)))
        peak, info = brentq(err, lo, hi, xtol=1e-9 * peak, maxiter=MAX_ITER, full_output=True)
        g = sim(peak)
        residual = abs(err(peak))
        if residual > tol:
            raise CalibrationError("CZ refinement did not converge", residual)
        phases = np.angle(np.diag(g))
        meta.update(iterations=info.iterations, cphase_error=residual)
    else:
        _, e_int = _adiabatic_phase(spec, bonds, tau, peak)
        phases = -(e_int - frame_energies(es) * tau)
    zs = _local_z(phases, tau)
    meta["peak_hz"] = peak
    return cz_schedule(spec, tau, peak, **meta).with_virtual_z(zs)


# ---------------------------------------------------------------------------
# Width sweeps
# ---------------------------------------------------------------------------


class CommensurateTable:
    """Refined X(pi/2) calibrations at integer widths, interpolated in between.

    At every integer ``n`` in ``ns`` the amplitude (through the ratio to the
    seed), and the two frame angles are refined against noise-free
    propagation; for other widths they are interpolated with cubic splines in
    ``n``.  The oscillating errors that commensurate driving cancels are
    therefore left in place away from integer widths, while the smooth,
    width-dependent part of the calibration is applied everywhere.
    """

    def __init__(self, spec: ChainSpec, qubit: int = 1, ns=range(3, 13)):
        from scipy.interpolate import CubicSpline

        self.spec = spec
        self.qubit = qubit
        self.ns = np.asarray(list(ns), dtype=float)
        es = eigenstructure(spec)
        self.omega_d = qubit_frequency(es, qubit)
        rows = []
        for n in self.ns:
            sch = calibrate_x90(spec, qubit, int(n), refine=True)
            amp = sch.segments[0].tone.amplitude
            pre, post = sch.virtual_z
            # _with_rotation_frame stored Z(-c) before and Z(-a) after (phi = 0).
            rows.append((amp / sch.meta["seed_hz"], -post.angle, -pre.angle))
        self.table = np.asarray(rows)
        # Shifting a frame angle by 2 pi only changes the global phase; unwrap for smooth splines.
        self.table[:, 1:] = np.unwrap(self.table[:, 1:], axis=0)
        self._splines = [CubicSpline(self.ns, self.table[:, k]) for k in range(3)]

    def parameters(self, n: float) -> tuple[float, float, float]:
        # Half a period of extrapolation on either side is allowed.
        if not self.ns[0] - 0.5 <= n <= self.ns[-1] + 0.5:
            raise ValueError(f"width {n} tau_L outside the calibrated range [{self.ns[0]}, {self.ns[-1]}]")
        return tuple(float(s(n)) for s in self._splines)

    def schedule(self, n: float, phi: float = 0.0) -> PulseSchedule:
        """``R(pi/2, phi)`` at width ``n tau_L`` with the drive carrier phase set to ``phi``."""
        ratio, a, c = self.parameters(n)
        tau = n * TWO_PI / self.omega_d
        seed = x90_seed(self.spec, self.qubit, tau)
        zs = (VirtualZ(self.qubit, -c, 0.0), VirtualZ(self.qubit, -a, tau))
        return drive_schedule(drive_bond(self.spec, self.qubit), tau, ratio * seed, self.omega_d, phase=phi,
                              virtual_z=zs, gate="x90", qubit=self.qubit, n=n, calibration="transfer")
