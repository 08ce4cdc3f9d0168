"""Charge and hyperfine noise synthesis and the Monte Carlo driver.

Random streams come from NumPy's counter-based ``Philox`` generator keyed by
``(master_seed, realization_index)``: every realization is reproducible on
its own and independent of how realizations are scheduled.  Within one
realization the draws are ordered as: hyperfine offsets for every site (site
order), then one white series per driven bond (sorted bond keys).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class ChargeNoiseSpec:
    """``S_V(f) = (a_mu / gamma)^2 / f^beta`` (two-sided, V^2/Hz).

    ``a_mu`` in eV/sqrt(Hz) at 1 Hz, ``gamma`` in eV/V.
    """

    a_mu: float = 1e-6
    gamma: float = 0.1
    beta: float = 1.0

    def __post_init__(self):
        if self.a_mu < 0:
            raise ValueError("a_mu must be non-negative")
        if not 0 <= self.beta <= 2:
            raise ValueError("beta must lie in [0, 2]")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def amplitude(self) -> float:
        """Voltage noise amplitude at 1 Hz, V/sqrt(Hz)."""
        return self.a_mu / self.gamma

    def psd(self, f):
        return self.amplitude**2 / np.asarray(f, dtype=float) ** self.beta


@dataclass(frozen=True)
class HyperfineSpec:
    """Quasi-static Larmor offsets ``delta_omega ~ N(0, sigma^2)``; ``sigma`` in rad/s."""

    sigma: float = 2 * np.pi * 0.05e6

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class NoiseRealization:
    """One sample of every noise channel for one propagation.

    ``delta_v`` maps bond -> barrier-voltage noise (V) on the time-grid
    points; ``delta_omega`` holds one Larmor offset (rad/s) per site.
    """

    delta_v: Mapping[str, np.ndarray] = field(default_factory=dict)
    delta_omega: np.ndarray | None = None
    seed: int | None = None
    index: int | None = None

    @classmethod
    def zero(cls) -> "NoiseRealization":
        return cls()


@dataclass(frozen=True)
class MonteCarloPlan:
    n_realizations: int = 512
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("need at least one realization")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master seed must fit in an unsigned 64-bit integer")


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    key = np.array([master_seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def generate_charge_series(spec: ChargeNoiseSpec, n_points: int, dt: float,
                           rng: np.random.Generator) -> np.ndarray:
    """Real voltage series with a ``1/f^beta`` spectrum.

    White Gaussian samples are Fourier transformed, coefficient ``k`` (the
    frequency ``k / T`` with ``T = n_points dt``) is scaled by
    ``(a_mu / gamma) sqrt((N / T) (k / T)^-beta)``, the zero-frequency term is
    dropped, and the result is transformed back.  Working on the half
    spectrum keeps the Hermitian symmetry, so the output is exactly real.
    """
    if n_points < 2:
        raise ValueError("need at least two grid points")
    u = rng.standard_normal(n_points)
    coeff = np.fft.rfft(u)
    total = n_points * dt
    k = np.arange(coeff.size, dtype=float)
    scale = np.zeros_like(k)
    scale[1:] = spec.amplitude * np.sqrt((n_points / total) * (k[1:] / total) ** (-spec.beta))
    return np.fft.irfft(coeff * scale, n=n_points)


def sample_hyperfine(spec: HyperfineSpec, n_spins: int, rng: np.random.Generator) -> np.ndarray:
    return spec.sigma * rng.standard_normal(n_spins)


def make_realization(master_seed: int, index: int, *, n_spins: int, bonds: Sequence[str],
                     n_points: int, dt: float, charge: ChargeNoiseSpec | None = None,
                     hyperfine: HyperfineSpec | None = None) -> NoiseRealization:
    """Draw one :class:`NoiseRealization`; disabled channels come back empty."""
    rng = realization_rng(master_seed, index)
    offsets = rng.standard_normal(n_spins)
    delta_omega = hyperfine.sigma * offsets if hyperfine is not None else None
    delta_v = {}
    for bond in sorted(bonds):
        if charge is not None and n_points >= 2:
            delta_v[bond] = generate_charge_series(charge, n_points, dt, rng)
        else:
            rng.standard_normal(max(n_points, 1))
    return NoiseRealization(delta_v, delta_omega, master_seed, index)


def periodogram(x: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided periodogram ``(dt / N) |FFT(x)|^2`` at the positive DFT frequencies."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    spec = np.abs(np.fft.rfft(x, axis=-1)) ** 2 * dt / n
    f = np.fft.rfftfreq(n, dt)
    return f[1:-1], spec[..., 1:-1]


class MonteCarloError(RuntimeError):
    def __init__(self, index: int, seed: int, cause: BaseException):
        super().__init__(f"realization {index} (master seed {seed}) failed: {cause!r}")
        self.index = index
        self.seed = seed


@dataclass
class MonteCarloResult:
    mean: Any
    stderr: Any
    samples: np.ndarray

    @property
    def n(self) -> int:
        return len(self.samples)


def _fsum_mean(values: np.ndarray) -> np.ndarray:
    flat = values.reshape(values.shape[0], -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])]) / values.shape[0]
    return out.reshape(values.shape[1:])


def aggregate(samples) -> MonteCarloResult:
    """Mean and standard error with exactly rounded (order independent) sums."""
    values = np.asarray(samples, dtype=float)
    n = values.shape[0]
    mean = _fsum_mean(values)
    if n > 1:
        var = _fsum_mean((values - mean) ** 2) * n / (n - 1)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.zeros_like(mean)
    if mean.ndim == 0:
        mean, stderr = float(mean), float(stderr)
    return MonteCarloResult(mean, stderr, values)


def monte_carlo(plan: MonteCarloPlan, experiment: Callable[[int], Any]) -> MonteCarloResult:
    """Run ``experiment(index)`` for every realization index and aggregate.

    The experiment must be a deterministic function of the index (it draws its
    noise through :func:`make_realization` with ``plan.master_seed``).
    """

    def run(i):
        try:
            return experiment(i)
        except Exception as exc:  # re-raised with replay information
            raise MonteCarloError(i, plan.master_seed, exc) from exc

    indices = range(plan.n_realizations)
    if plan.workers > 1:
        with ThreadPoolExecutor(plan.workers) as pool:
            samples = list(pool.map(run, indices))
    else:
        samples = [run(i) for i in indices]
    return aggregate(samples)
