"""Gate fidelities over fiducial states, error budgets and Ramsey T2* fits."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .noise import (
    ChargeNoiseSpec,
    HyperfineSpec,
    MonteCarloPlan,
    MonteCarloResult,
    make_realization,
    monte_carlo,
)


class FitError(RuntimeError):
    """The Ramsey fit did not converge."""


# ---------------------------------------------------------------------------
# Fiducial-state fidelities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiducialSet:
    n_qubits: int
    states: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.states)


_SINGLE = (
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([1, 1], dtype=complex) / np.sqrt(2),
    np.array([1, 1j], dtype=complex) / np.sqrt(2),
)


@lru_cache(maxsize=None)
def fiducials(n_qubits: int) -> FiducialSet:
    """The four single-qubit fiducial states or their 16 two-qubit products."""
    if n_qubits not in (1, 2):
        raise ValueError("fiducial sets exist for one or two qubits")
    vecs = [np.array(v) for v in _SINGLE]
    if n_qubits == 2:
        vecs = [np.kron(a, b) for a, b in product(_SINGLE, _SINGLE)]
    return FiducialSet(n_qubits, tuple(np.outer(v, v.conj()) for v in vecs))


def _n_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim or n not in (1, 2):
        raise ValueError(f"dimension {dim} is not that of one or two qubits")
    return n


def entanglement_fidelity(actual: Sequence[np.ndarray] | np.ndarray, ideal: np.ndarray,
                          n_qubits: int | None = None) -> float:
    """``F_e = 4^-n sum_rho Tr[rho_actual(rho) rho_ideal(rho)]`` over the fiducial set.

    ``actual`` is either the list of (unnormalized, projected) output density
    matrices in fiducial order or a ``2^n x 2^n`` gate matrix, which is then
    applied to each fiducial state.  Leaked population is not renormalized,
    so it lowers the fidelity.
    """
    ideal = np.asarray(ideal)
    n = _n_qubits(ideal.shape[0]) if n_qubits is None else n_qubits
    fid = fiducials(n)
    if isinstance(actual, np.ndarray) and actual.ndim == 2:
        if actual.shape != ideal.shape:
            raise ValueError("gate and ideal unitary differ in dimension")
        outs = [actual @ rho @ actual.conj().T for rho in fid.states]
    else:
        outs = list(actual)
        if len(outs) != len(fid):
            raise ValueError(f"expected {len(fid)} output states, got {len(outs)}")
    total = 0.0
    for rho, out in zip(fid.states, outs):
        if out.shape != ideal.shape:
            raise ValueError("output state has the wrong dimension")
        target = ideal @ rho @ ideal.conj().T
        total += float(np.real(np.trace(out @ target)))
    return total / 4**n


def average_fidelity(f_e: float, n_qubits: int) -> float:
    """``F_g = (2^n F_e + 1) / (2^n + 1)``."""
    d = 2**n_qubits
    return (d * f_e + 1.0) / (d + 1.0)


def gate_error(gate: np.ndarray, ideal: np.ndarray) -> float:
    """``1 - F_g`` of a gate matrix against an ideal unitary."""
    n = _n_qubits(ideal.shape[0])
    return 1.0 - average_fidelity(entanglement_fidelity(gate, ideal, n), n)


def leakage(gate: np.ndarray) -> float:
    """Fiducial-averaged population lost from the computational block."""
    fid = fiducials(_n_qubits(gate.shape[0]))
    return float(np.mean([1.0 - np.real(np.trace(gate @ rho @ gate.conj().T)) for rho in fid.states]))


# ---------------------------------------------------------------------------
# Error budgets
# ---------------------------------------------------------------------------


@dataclass
class ChannelResult:
    error: float
    stderr: float
    leakage: float
    leakage_stderr: float
    n_realizations: int


@dataclass
class FidelityReport:
    """Error budget of one gate.

    ``channels`` maps ``coherent``, ``charge``, ``hyperfine`` and ``both`` to
    their ``1 - F_g`` statistics; ``entanglement_fidelity``,
    ``average_fidelity`` and ``leakage`` refer to the ``both`` channel when it
    was run (the coherent one otherwise).
    """

    entanglement_fidelity: float
    average_fidelity: float
    leakage: float
    n_qubits: int
    channels: dict[str, ChannelResult] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["channels"] = {k: asdict(v) for k, v in self.channels.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=float)


DEFAULT_CHANNELS = ("coherent", "charge", "hyperfine", "both")


def error_budget(runner, ideal: np.ndarray, plan: MonteCarloPlan,
                 charge: ChargeNoiseSpec | None = None, hyperfine: HyperfineSpec | None = None,
                 channels: Sequence[str] = DEFAULT_CHANNELS) -> FidelityReport:
    """Run the coherent, charge-only, hyperfine-only and combined configurations.

    ``runner`` is a :class:`~rstqubit.gates.GateRunner`.  Every noisy channel
    uses the same master seed, so realization ``i`` of ``both`` shares its
    draws with realization ``i`` of the single-channel runs.
    """
    from .gates import NoiseConfig

    charge = charge if charge is not None else ChargeNoiseSpec()
    hyperfine = hyperfine if hyperfine is not None else HyperfineSpec()
    configs = {
        "coherent": NoiseConfig(),
        "charge": NoiseConfig(charge=charge),
        "hyperfine": NoiseConfig(hyperfine=hyperfine),
        "both": NoiseConfig(charge=charge, hyperfine=hyperfine),
    }
    n = _n_qubits(ideal.shape[0])
    results: dict[str, ChannelResult] = {}
    for name in channels:
        cfg = configs[name]

        def experiment(i, cfg=cfg):
            g = runner.gate(cfg, plan.master_seed, i)
            return [gate_error(g, ideal), leakage(g)]

        if cfg.noiseless:
            mc = monte_carlo(MonteCarloPlan(1, plan.master_seed, 1), experiment)
        else:
            mc = monte_carlo(plan, experiment)
        results[name] = ChannelResult(float(mc.mean[0]), float(mc.stderr[0]), float(mc.mean[1]),
                                      float(mc.stderr[1]), mc.n)
    head = results.get("both") or results.get("coherent") or next(iter(results.values()))
    f_g = 1.0 - head.error
    f_e = ((2**n + 1) * f_g - 1.0) / 2**n
    return FidelityReport(f_e, f_g, head.leakage, n, results)


# ---------------------------------------------------------------------------
# Ramsey T2*
# ---------------------------------------------------------------------------


def ramsey_model(t, amplitude, t2star, frequency, phase, offset):
    """``P(t) = A exp(-(t / T2*)^2) cos(2 pi f t + phi) + B``."""
    t = np.asarray(t, dtype=float)
    return amplitude * np.exp(-((t / t2star) ** 2)) * np.cos(TWO_PI_F * frequency * t + phase) + offset


TWO_PI_F = 2.0 * np.pi


@dataclass(frozen=True)
class RamseyFit:
    t2star: float
    amplitude: float
    frequency: float
    phase: float
    offset: float
    residual: float
    bounded_by_window: bool = False
    nfev: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _initial_guess(t: np.ndarray, p: np.ndarray) -> np.ndarray:
    offset = float(np.mean(p))
    amplitude = 0.5 * float(np.ptp(p))
    dt = t[1] - t[0]
    spectrum = np.abs(np.fft.rfft(p - offset))
    freqs = np.fft.rfftfreq(len(p), dt)
    k = int(np.argmax(spectrum[1:]) + 1) if len(spectrum) > 1 else 0
    frequency = float(freqs[k])
    first = p[0] - offset
    phase = float(np.arccos(np.clip(first / amplitude, -1, 1))) if amplitude > 0 else 0.0
    # Envelope half-width: where the running peak deviation falls below half its start.
    dev = np.abs(p - offset)
    window = max(int(round(1.0 / (frequency * dt))) if frequency > 0 else 1, 1)
    env = np.array([dev[max(0, i - window):i + window + 1].max() for i in range(len(p))])
    below = np.flatnonzero(env < 0.5 * env[0])
    half = t[below[0]] if below.size else t[-1]
    t2star = max(float(half) / np.sqrt(np.log(2.0)), dt)
    return np.array([amplitude, t2star, frequency, phase, offset])


def fit_ramsey(t, p, max_iter: int = 200, guess: Sequence[float] | None = None) -> RamseyFit:
    """Fit the Gaussian-decay cosine by trust-region nonlinear least squares.

    A fitted ``T2*`` longer than the sampled window is flagged through
    ``bounded_by_window`` rather than treated as a failure.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    if t.shape != p.shape or t.size < 6:
        raise ValueError("need at least six matching samples")
    x0 = np.asarray(_initial_guess(t, p) if guess is None else guess, dtype=float)
    scale = np.array([1.0, t[-1], 1.0 / t[-1], 1.0, 1.0])
    lower = [0.0, 1e-3 * (t[1] - t[0]), 0.0, -np.inf, -np.inf]
    upper = [np.inf, np.inf, np.inf, np.inf, np.inf]
    x0 = np.clip(x0, np.array(lower) + 1e-300, None)

    def resid(x):
        return ramsey_model(t, *(x * scale)) - p

    sol = least_squares(resid, x0 / scale, method="trf", max_nfev=max_iter * 10, x_scale="jac",
                        bounds=(np.array(lower) / scale, np.array(upper) / scale),
                        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if sol.status <= 0:
        raise FitError(f"Ramsey fit did not converge: {sol.message}")
    a, t2, f, ph, b = sol.x * scale
    ph = float(np.angle(np.exp(1j * ph)))
    residual = float(np.sqrt(np.mean(sol.fun**2)))
    return RamseyFit(float(t2), float(a), float(f), ph, float(b), residual,
                     bounded_by_window=bool(t2 > t[-1]), nfev=int(sol.nfev))


def ramsey_signal(t: np.ndarray, larmor: np.ndarray, detuning: float = 1e6) -> np.ndarray:
    """Spin-down probability after pi/2 - hold - pi/2 for each Larmor offset.

    ``larmor`` holds frequency offsets (rad/s) of the spin relative to the
    pulse frame; ``detuning`` (Hz) is the deliberate frame offset producing
    fringes.  Ideal instantaneous pulses: ``P_down = (1 + cos(phase)) / 2``.
    """
    t = np.asarray(t, dtype=float)[:, None]
    phase = (TWO_PI_F * detuning + np.asarray(larmor)[None, :]) * t
    return 0.5 * (1.0 + np.cos(phase))


def ramsey_t2star(hyperfine: HyperfineSpec, delays: Sequence[float], plan: MonteCarloPlan,
                  detuning: float = 1e6, propagator: Callable | None = None) -> RamseyFit:
    """Simulate and fit a single-spin Ramsey experiment.

    Each realization draws one quasi-static hyperfine offset; the held spin
    precesses at ``HYPERFINE_COUPLING * delta_omega`` relative to the frame.
    ``propagator(delta_omega, delays)`` may replace the ideal-pulse signal
    model with a simulated sequence.
    """
    from .spin_model import HYPERFINE_COUPLING

    delays = np.asarray(delays, dtype=float)

    def experiment(i):
        real = make_realization(plan.master_seed, i, n_spins=1, bonds=(), n_points=0, dt=1.0,
                                hyperfine=hyperfine)
        offset = float(real.delta_omega[0])
        if propagator is not None:
            return propagator(offset, delays)
        return ramsey_signal(delays, np.array([HYPERFINE_COUPLING * offset]), detuning)[:, 0]

    mc: MonteCarloResult = monte_carlo(plan, experiment)
    return fit_ramsey(delays, np.asarray(mc.mean))


def fit_omega(sigmas: Sequence[float], t2stars: Sequence[float]) -> float:
    """Least-squares ``Omega`` in ``T2* = Omega / sigma`` (``sigma`` as ``sigma / 2pi`` in Hz)."""
    s = np.asarray(sigmas, dtype=float)
    t = np.asarray(t2stars, dtype=float)
    return float(np.sum(t / s) / np.sum(1.0 / s**2))
