"""Experiment configurations and single-point evaluators for sweeps.

An :class:`ExperimentConfig` names a gate kind, a chain, fixed gate
parameters, noise settings and up to two sweep axes.  Each grid point is
evaluated by :func:`evaluate_point`, a pure function of the config, the
axis values and the point seed, returning a list of CSV rows.  The batch
runner in :mod:`rstqubit.cli` handles ordering, resumption and output.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product
from typing import Any, Mapping, Sequence

import numpy as np

from .calibration import CommensurateTable, calibrate_cz, calibrate_x90, isolated_x90
from .dynamics import bloch_trajectory, default_grid, propagate
from .gates import GateRunner, ideal_cz, ideal_x90, rotation
from .metrics import (
    DEFAULT_CHANNELS,
    error_budget,
    fiducials,
    fit_ramsey,
    ramsey_model,
    ramsey_signal,
)
from .noise import ChargeNoiseSpec, HyperfineSpec, MonteCarloPlan, make_realization, monte_carlo
from .oracles import NearResonanceError, zz_coupler_perturbative, zz_direct_perturbative
from .pulse import idle_schedule
from .spin_model import (
    HYPERFINE_COUPLING,
    LEAKAGE,
    TWO_PI,
    ChainError,
    ChainSpec,
    LabelingError,
    Topology,
    eigenstructure,
    pair_spec,
    qubit_frequency,
    tau_cz,
    zz_interaction,
)

GATES = ("zz", "x90", "cz", "ramsey", "bloch", "idle")
CALIBRATIONS = ("refine", "seed", "transfer")
MAX_AXES = 2


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    path: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class NoiseSettings:
    """Noise channels for gate runs.

    ``charge`` and ``sigma_hz`` (hyperfine ``sigma / 2pi``) switch the two
    channels on; ``channels`` lists which error-budget configurations to
    report.
    """

    charge: ChargeNoiseSpec | None = None
    sigma_hz: float | None = None
    channels: tuple[str, ...] = ("coherent",)

    @property
    def hyperfine(self) -> HyperfineSpec | None:
        return None if self.sigma_hz is None else HyperfineSpec(TWO_PI * self.sigma_hz)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    gate: str
    chain: ChainSpec
    params: Mapping[str, Any] = field(default_factory=dict)
    axes: tuple[Axis, ...] = ()
    noise: NoiseSettings = NoiseSettings()
    realizations: int = 64
    description: str = ""
    reconstructed: tuple[str, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a.values) for a in self.axes)

    def points(self) -> list[tuple[float, ...]]:
        """Grid points in row-major order (last axis fastest)."""
        return list(product(*(a.values for a in self.axes)))

    def to_dict(self) -> dict:
        noise: dict[str, Any] = {"channels": list(self.noise.channels)}
        if self.noise.charge is not None:
            c = self.noise.charge
            noise["charge"] = {"a_mu_ev": c.a_mu, "gamma_ev_per_v": c.gamma, "beta": c.beta}
        if self.noise.sigma_hz is not None:
            noise["sigma_hz"] = self.noise.sigma_hz
        return {
            "name": self.name,
            "gate": self.gate,
            "description": self.description,
            "chain": self.chain.to_dict(),
            "params": dict(self.params),
            "sweep": [{"path": a.path, "values": list(a.values)} for a in self.axes],
            "noise": noise,
            "realizations": self.realizations,
            "reconstructed": list(self.reconstructed),
        }

    def digest(self) -> str:
        """Hash of everything that determines the numbers (not the description)."""
        data = self.to_dict()
        data.pop("description")
        data.pop("reconstructed")
        text = json.dumps(data, sort_keys=True, default=float)
        return hashlib.sha256(text.encode()).hexdigest()


PARAM_KEYS = {
    "zz": {"mode"},
    "x90": {"n", "phi", "qubit", "calibration", "reference"},
    "cz": {"n", "refine"},
    "ramsey": {"output", "detuning_hz", "n_delays", "window_s"},
    "bloch": {"n", "phi", "qubit", "calibration", "n_samples"},
    "idle": {"duration_s"},
}

DEFAULT_PARAMS = {
    "zz": {"mode": "full"},
    "x90": {"n": 6, "phi": 0.0, "qubit": 1, "calibration": "refine", "reference": "chain"},
    "cz": {"n": 4, "refine": True},
    "ramsey": {"output": "fit", "detuning_hz": 1e6, "n_delays": 401, "window_s": None},
    "bloch": {"n": 4, "phi": np.pi / 4, "qubit": 1, "calibration": "transfer", "n_samples": 201},
    "idle": {"duration_s": 50e-9},
}


def _number(value, path: str, positive: bool = False, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and value <= 0:
        raise ConfigError(path, "must be positive")
    if integer and value != int(value):
        raise ConfigError(path, "must be an integer")
    return value


def _axis_values(item: Mapping, path: str) -> tuple[float, ...]:
    if "values" in item:
        raw = item["values"]
        if not isinstance(raw, (list, tuple)) or not raw:
            raise ConfigError(f"{path}.values", "must be a non-empty list")
        return tuple(_number(v, f"{path}.values[{i}]") for i, v in enumerate(raw))
    try:
        start, stop, num = item["start"], item["stop"], item["num"]
    except KeyError as exc:
        raise ConfigError(path, f"needs 'values' or 'start'/'stop'/'num' (missing {exc.args[0]!r})") from None
    num = int(_number(num, f"{path}.num", positive=True, integer=True))
    return tuple(float(v) for v in np.linspace(_number(start, f"{path}.start"), _number(stop, f"{path}.stop"), num))


def check_axis_path(path: str, chain: ChainSpec, where: str) -> None:
    head, _, tail = path.partition(".")
    if head == "exchange":
        if tail in ("inter", "intra") and chain.topology is not Topology.PAIR:
            return
        if tail == "intra" or tail in chain.bonds:
            return
        raise ConfigError(where, f"unknown exchange parameter {tail!r} for {chain.topology.value}")
    if head == "larmor":
        if tail in chain.sites:
            return
        raise ConfigError(where, f"unknown site {tail!r} for {chain.topology.value}")
    if head == "gate" and tail in ("n", "phi", "qubit"):
        return
    if head == "noise" and tail in ("sigma_hz", "a_mu_ev"):
        return
    raise ConfigError(where, f"unknown parameter path {path!r}")


def config_from_dict(data: Mapping, name: str | None = None) -> ExperimentConfig:
    """Validate a JSON-style mapping into an :class:`ExperimentConfig`."""
    if not isinstance(data, Mapping):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {"name", "gate", "description", "chain", "params", "sweep", "noise", "realizations",
             "reconstructed"}
    extra = set(data) - known
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown field")
    gate = data.get("gate")
    if gate not in GATES:
        raise ConfigError("gate", f"must be one of {', '.join(GATES)}")
    chain_data = data.get("chain", {"preset": "table1", "topology": "direct4"})
    if not isinstance(chain_data, Mapping):
        raise ConfigError("chain", "must be an object")
    try:
        chain = ChainSpec.from_dict(chain_data)
    except (ChainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError("chain", str(exc)) from None

    params = dict(DEFAULT_PARAMS[gate])
    given = data.get("params", {})
    if not isinstance(given, Mapping):
        raise ConfigError("params", "must be an object")
    for key, value in given.items():
        if key not in PARAM_KEYS[gate]:
            raise ConfigError(f"params.{key}", f"not a parameter of gate {gate!r}")
        params[key] = value
    _check_params(gate, params, chain)

    sweep = data.get("sweep", [])
    if not isinstance(sweep, (list, tuple)):
        raise ConfigError("sweep", "must be a list of axes")
    if len(sweep) > MAX_AXES:
        raise ConfigError("sweep", f"at most {MAX_AXES} axes are supported")
    axes = []
    for i, item in enumerate(sweep):
        where = f"sweep[{i}]"
        if not isinstance(item, Mapping) or "path" not in item:
            raise ConfigError(where, "each axis needs a 'path'")
        check_axis_path(item["path"], chain, f"{where}.path")
        axes.append(Axis(item["path"], _axis_values(item, where)))
    if len({a.path for a in axes}) != len(axes):
        raise ConfigError("sweep", "axes must be distinct")

    noise = _noise_from_dict(data.get("noise", {}), gate)
    realizations = int(_number(data.get("realizations", 64), "realizations", positive=True, integer=True))
    return ExperimentConfig(
        name=str(data.get("name", name or gate)),
        gate=gate,
        chain=chain,
        params=params,
        axes=tuple(axes),
        noise=noise,
        realizations=realizations,
        description=str(data.get("description", "")),
        reconstructed=tuple(data.get("reconstructed", ())),
    )


def _check_params(gate: str, params: dict, chain: ChainSpec) -> None:
    if "n" in params:
        _number(params["n"], "params.n", positive=True)
    if "phi" in params:
        _number(params["phi"], "params.phi")
    if "qubit" in params:
        q = params["qubit"]
        if q not in ((1,) if chain.topology is Topology.PAIR else (1, 2)):
            raise ConfigError("params.qubit", f"no qubit {q!r} in a {chain.topology.value} chain")
    if params.get("calibration", "refine") not in CALIBRATIONS:
        raise ConfigError("params.calibration", f"must be one of {', '.join(CALIBRATIONS)}")
    if params.get("reference", "chain") not in ("chain", "pair"):
        raise ConfigError("params.reference", "must be 'chain' or 'pair'")
    if params.get("reference") == "pair" and params.get("calibration") == "transfer":
        raise ConfigError("params.reference", "transfer calibration is defined on the chain only")
    if gate == "cz" and chain.topology is Topology.PAIR:
        raise ConfigError("chain.topology", "a CZ gate needs a two-qubit chain")
    if gate == "zz" and chain.topology is Topology.PAIR:
        raise ConfigError("chain.topology", "the ZZ interaction needs a two-qubit chain")
    if gate == "zz" and params["mode"] not in ("full", "large_detuning"):
        raise ConfigError("params.mode", "must be 'full' or 'large_detuning'")
    if gate == "ramsey" and params["output"] not in ("fit", "trace"):
        raise ConfigError("params.output", "must be 'fit' or 'trace'")
    if gate == "idle":
        _number(params["duration_s"], "params.duration_s", positive=True)


def _noise_from_dict(data, gate: str) -> NoiseSettings:
    if not isinstance(data, Mapping):
        raise ConfigError("noise", "must be an object")
    extra = set(data) - {"charge", "sigma_hz", "channels"}
    if extra:
        raise ConfigError(f"noise.{sorted(extra)[0]}", "unknown field")
    charge = data.get("charge", False)
    spec = None
    if charge is True:
        spec = ChargeNoiseSpec()
    elif isinstance(charge, Mapping):
        try:
            spec = ChargeNoiseSpec(float(charge.get("a_mu_ev", 1e-6)), float(charge.get("gamma_ev_per_v", 0.1)),
                                   float(charge.get("beta", 1.0)))
        except (TypeError, ValueError) as exc:
            raise ConfigError("noise.charge", str(exc)) from None
    elif charge not in (False, None):
        raise ConfigError("noise.charge", "must be true/false or an object")
    sigma = data.get("sigma_hz")
    if sigma is not None:
        sigma = _number(sigma, "noise.sigma_hz")
        if sigma < 0:
            raise ConfigError("noise.sigma_hz", "must be non-negative")
    if gate == "ramsey" and sigma is None:
        sigma = 0.05e6
    default = ("both",) if spec is not None and sigma is not None else (
        ("charge",) if spec is not None else ("hyperfine",) if sigma is not None else ("coherent",))
    channels = data.get("channels", default)
    if channels == "budget":
        channels = DEFAULT_CHANNELS
    if isinstance(channels, str) or not all(c in DEFAULT_CHANNELS for c in channels):
        raise ConfigError("noise.channels", f"must list channels from {', '.join(DEFAULT_CHANNELS)}")
    return NoiseSettings(spec, sigma, tuple(channels))


# ---------------------------------------------------------------------------
# Applying axis values
# ---------------------------------------------------------------------------


def inter_bonds(chain: ChainSpec) -> tuple[str, ...]:
    return ("2c", "3c") if chain.topology is Topology.COUPLER5 else ("23",)


def intra_bonds(chain: ChainSpec) -> tuple[str, ...]:
    return ("12",) if chain.topology is Topology.PAIR else ("12", "34")


def apply_point(config: ExperimentConfig, values: Sequence[float]) -> tuple[ChainSpec, dict, NoiseSettings]:
    """Chain, gate parameters and noise settings at one grid point."""
    chain = config.chain
    params = dict(config.params)
    noise = config.noise
    for axis, value in zip(config.axes, values):
        head, _, tail = axis.path.partition(".")
        if head == "exchange":
            bonds = {"inter": inter_bonds(chain), "intra": intra_bonds(chain)}.get(tail, (tail,))
            chain = chain.with_exchange(**{b: value for b in bonds})
        elif head == "larmor":
            chain = chain.with_larmor(**{tail: value})
        elif head == "gate":
            params[tail] = int(value) if tail == "qubit" else value
        elif tail == "sigma_hz":
            noise = replace(noise, sigma_hz=value)
        else:
            base = noise.charge or ChargeNoiseSpec()
            noise = replace(noise, charge=replace(base, a_mu=value))
    return chain, params, noise


# ---------------------------------------------------------------------------
# Point evaluation
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _table(chain_json: str, qubit: int, top: int) -> CommensurateTable:
    return CommensurateTable(ChainSpec.from_json(chain_json), qubit, range(3, top + 1))


def x90_schedule(chain: ChainSpec, params: Mapping):
    """X(pi/2) schedule for the configured calibration mode."""
    n, phi, qubit = float(params["n"]), float(params["phi"]), int(params.get("qubit", 1))
    mode = params.get("calibration", "refine")
    if mode == "transfer":
        top = max(12, int(math.floor(n)) + 1)
        return _table(chain.to_json(), qubit, top).schedule(n, phi)
    refine = mode == "refine"
    calibrate = isolated_x90 if params.get("reference", "chain") == "pair" else calibrate_x90
    if n == int(n):
        return calibrate(chain, qubit, int(n), refine=refine, phi=phi)
    if calibrate is isolated_x90 and chain.topology is not Topology.PAIR:
        omega = qubit_frequency(eigenstructure(pair_spec(chain, qubit)), 1)
    else:
        omega = qubit_frequency(eigenstructure(chain), qubit)
    return calibrate(chain, qubit, n, refine=refine, phi=phi, width=n * TWO_PI / omega)


def _budget_row(runner: GateRunner, ideal: np.ndarray, noise: NoiseSettings, seed: int,
                realizations: int) -> dict:
    plan = MonteCarloPlan(realizations, seed)
    report = error_budget(runner, ideal, plan, noise.charge, noise.hyperfine, noise.channels)
    row = {}
    for ch in noise.channels:
        r = report.channels[ch]
        row[f"error_{ch}"] = r.error
        row[f"stderr_{ch}"] = r.stderr
        row[f"leakage_{ch}"] = r.leakage
    return row


def _eval_zz(chain, params, noise, seed, realizations):
    try:
        es = eigenstructure(chain)
    except LabelingError:
        # Near a level crossing with the coupler the tilde labels are undefined.
        return [{"zeta_hz": float("nan"), "tau_cz_s": float("nan"), "zeta_oracle_hz": float("nan"),
                 "labeled": 0}]
    row = {"zeta_hz": zz_interaction(es) / TWO_PI, "tau_cz_s": tau_cz(es)}
    if chain.topology is Topology.DIRECT4:
        row["zeta_oracle_hz"] = zz_direct_perturbative(chain)
    else:
        try:
            row["zeta_oracle_hz"] = zz_coupler_perturbative(chain, params["mode"])
        except NearResonanceError:
            row["zeta_oracle_hz"] = float("nan")
    row["labeled"] = 1
    return [row]


def _eval_x90(chain, params, noise, seed, realizations):
    schedule = x90_schedule(chain, params)
    runner = GateRunner(chain, schedule)
    ideal = ideal_x90(chain, int(params.get("qubit", 1)), float(params["phi"]))
    row = {"duration_s": schedule.total_duration, "amplitude_hz": schedule.segments[0].tone.amplitude}
    row.update(_budget_row(runner, ideal, noise, seed, realizations))
    return [row]


def _leakage_populations(chain, schedule, es) -> dict:
    """Fiducial-averaged population of each leakage eigenstate (noise free)."""
    prop = propagate(chain, schedule, default_grid(chain, schedule))
    vc = es.computational_vectors()[prop.indices]
    out = {}
    fid = fiducials(2)
    for label in LEAKAGE[chain.topology]:
        vl = es.vector(label)[prop.indices]
        amp = vl.conj() @ prop.unitary @ vc
        out[f"pop_{label}"] = float(np.mean([np.real(amp @ rho @ amp.conj()) for rho in fid.states]))
    return out


def _eval_cz(chain, params, noise, seed, realizations):
    es = eigenstructure(chain)
    schedule = calibrate_cz(chain, float(params["n"]), refine=bool(params["refine"]))
    runner = GateRunner(chain, schedule, es=es)
    row = {"duration_s": schedule.total_duration, "tau_cz_s": tau_cz(es), "peak_hz": schedule.meta["peak_hz"]}
    row.update(_budget_row(runner, ideal_cz(), noise, seed, realizations))
    if "coherent" in noise.channels:
        row.update(_leakage_populations(chain, schedule, es))
    return [row]


def _eval_idle(chain, params, noise, seed, realizations):
    runner = GateRunner(chain, idle_schedule(float(params["duration_s"])))
    ideal = np.eye(2**chain.n_qubits, dtype=complex)
    return [_budget_row(runner, ideal, noise, seed, realizations)]


def ramsey_delays(sigma_hz: float, n_delays: int = 401, window_s: float | None = None) -> np.ndarray:
    """Hold times spanning about three expected ``T2*`` (8 us at 0.04 MHz)."""
    if window_s is None:
        window_s = 8e-6 * (0.04e6 / sigma_hz) if sigma_hz > 0 else 8e-6
    return np.linspace(0.0, window_s, int(n_delays))


def ramsey_average(sigma_hz: float, delays: np.ndarray, seed: int, realizations: int,
                   detuning_hz: float = 1e6) -> np.ndarray:
    """Ensemble-averaged spin-down probability of the ideal-pulse Ramsey sequence."""
    hyper = HyperfineSpec(TWO_PI * sigma_hz)

    def experiment(i):
        real = make_realization(seed, i, n_spins=1, bonds=(), n_points=0, dt=1.0, hyperfine=hyper)
        return ramsey_signal(delays, HYPERFINE_COUPLING * real.delta_omega, detuning_hz)[:, 0]

    return np.asarray(monte_carlo(MonteCarloPlan(realizations, seed), experiment).mean)


def _eval_ramsey(chain, params, noise, seed, realizations):
    sigma = float(noise.sigma_hz)
    delays = ramsey_delays(sigma, params["n_delays"], params["window_s"])
    p = ramsey_average(sigma, delays, seed, realizations, params["detuning_hz"])
    fit = fit_ramsey(delays, p)
    if params["output"] == "trace":
        model = ramsey_model(delays, fit.amplitude, fit.t2star, fit.frequency, fit.phase, fit.offset)
        return [{"t_s": t, "p_down": v, "p_fit": m} for t, v, m in zip(delays, p, model)]
    return [{"t2star_s": fit.t2star, "omega": fit.t2star * sigma,
             "amplitude": fit.amplitude, "frequency_hz": fit.frequency, "residual": fit.residual,
             "bounded_by_window": int(fit.bounded_by_window)}]


def _eval_bloch(chain, params, noise, seed, realizations):
    qubit = int(params.get("qubit", 1))
    schedule = x90_schedule(chain, params)
    grid = default_grid(chain, schedule)
    label = "du" if chain.topology is Topology.PAIR else ("dudu" if chain.topology is Topology.DIRECT4 else "dudud")
    es = eigenstructure(chain)
    psi0 = es.vector(label)
    prop = propagate(chain, schedule, grid, initial=psi0, record=True)
    times = grid.times
    # Pre-pulse frame updates rotate the initial |0> only by a phase; the
    # post-pulse update is applied to the final point so the endpoint is the gate output.
    traj = bloch_trajectory(prop.states, times, chain, qubit, qubit_frequency(es, qubit))
    r = traj.r.copy()
    post = sum(z.angle for z in schedule.z_after() if z.qubit == qubit)
    c, s = np.cos(post), np.sin(post)
    r[-1, :2] = [c * r[-1, 0] - s * r[-1, 1], s * r[-1, 0] + c * r[-1, 1]]
    # Ideal rotation with the angle following the envelope area.
    tau = schedule.total_duration
    frac = times / tau - np.sin(TWO_PI * times / tau) / TWO_PI
    phi = float(params["phi"])
    ideal = np.array([_bloch_of(rotation(0.5 * np.pi * f, phi) @ np.array([1.0, 0.0])) for f in frac])
    step = max(1, (len(times) - 1) // max(int(params["n_samples"]) - 1, 1))
    keep = sorted(set(range(0, len(times), step)) | {len(times) - 1})
    return [{"t_s": times[k], "r_x": r[k, 0], "r_y": r[k, 1], "r_z": r[k, 2], "ideal_x": ideal[k, 0],
             "ideal_y": ideal[k, 1], "ideal_z": ideal[k, 2], "purity_weight": traj.population[k]}
            for k in keep]


def _bloch_of(psi: np.ndarray) -> np.ndarray:
    rho = np.outer(psi, psi.conj())
    return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])


_EVALUATORS = {"zz": _eval_zz, "x90": _eval_x90, "cz": _eval_cz, "idle": _eval_idle,
               "ramsey": _eval_ramsey, "bloch": _eval_bloch}


def evaluate_point(config: ExperimentConfig, values: Sequence[float], seed: int) -> list[dict]:
    """Rows (axis columns first) for one grid point."""
    chain, params, noise = apply_point(config, values)
    rows = _EVALUATORS[config.gate](chain, params, noise, seed, config.realizations)
    prefix = {axis.path: float(v) for axis, v in zip(config.axes, values)}
    return [{**prefix, **row} for row in rows]


def point_seed(master_seed: int, panel: int, index: int) -> int:
    """Per-point master seed derived from the run seed, panel and point index."""
    seq = np.random.SeedSequence([int(master_seed), int(panel), int(index)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])
