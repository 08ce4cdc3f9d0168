"""Exchange waveforms, pulse schedules and virtual-Z bookkeeping.

Exchanges are ``J / h`` in Hz, times in seconds, voltages in volts and lever
arms ``alpha`` in 1/V.  Carrier frequencies in :class:`DriveTone` are angular
(rad/s).
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .spin_model import TWO_PI, ChainSpec

MAX_EXPONENT = 60.0


class PulseError(ValueError):
    """Invalid pulse or schedule."""


def exchange_from_voltage(j_residual, alpha: float, v_barrier):
    """``J = J^r exp(2 alpha V_B)``."""
    if np.any(np.asarray(j_residual) < 0):
        raise PulseError("residual exchange must be non-negative")
    expo = 2.0 * alpha * np.asarray(v_barrier, dtype=float)
    if np.any(expo > MAX_EXPONENT):
        raise PulseError(f"barrier pulse too large: 2 alpha V_B = {np.max(expo):.1f} > {MAX_EXPONENT}")
    return j_residual * np.exp(expo)


def voltage_from_exchange(j_residual: float, alpha: float, j_target):
    """Barrier voltage producing ``j_target``; inverse of :func:`exchange_from_voltage`."""
    j_target = np.asarray(j_target, dtype=float)
    if np.any(j_target <= 0):
        raise PulseError("target exchange must be positive")
    if j_residual <= 0:
        raise PulseError("no barrier voltage reaches a target from zero residual exchange")
    if np.any(j_target < 1e-15 * j_residual):
        raise PulseError("target exchange below the log-domain guard")
    return np.log(j_target / j_residual) / (2.0 * alpha)


def exchange_sensitivity(j_residual: float, alpha: float, v_barrier):
    """``dJ / dV_B = 2 alpha J``."""
    return 2.0 * alpha * exchange_from_voltage(j_residual, alpha, v_barrier)


class EnvelopeShape(str, enum.Enum):
    COSINE = "cosine"


@dataclass(frozen=True)
class EnvelopeSpec:
    """Raised-cosine envelope ``s(t) = (1 - cos(2 pi t / tau)) / 2`` on ``[0, tau]``."""

    width: float
    shape: EnvelopeShape = EnvelopeShape.COSINE

    def __post_init__(self):
        if not (self.width > 0 and np.isfinite(self.width)):
            raise PulseError(f"envelope width must be positive, got {self.width}")
        object.__setattr__(self, "shape", EnvelopeShape(self.shape))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.width)
        return np.where(inside, 0.5 - 0.5 * np.cos(TWO_PI * t / self.width), 0.0)


@dataclass(frozen=True)
class DriveTone:
    """Carrier of a resonant drive; ``amplitude`` is ``J_d / h`` in Hz."""

    amplitude: float
    carrier: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise PulseError("drive amplitude must be non-negative")


def drive_waveform(j_residual: float, tone: DriveTone, env: EnvelopeSpec, t):
    """``J(t) = J^r + J_d s(t) [1 + cos(omega_d t + phi)]`` (Hz)."""
    t = np.asarray(t, dtype=float)
    return j_residual + tone.amplitude * env(t) * (1.0 + np.cos(tone.carrier * t + tone.phase))


def commensurate_width(n: int, omega_q: float) -> float:
    """Pulse width ``n * 2 pi / omega_q``."""
    if int(n) != n or n < 1:
        raise PulseError(f"commensurate multiple must be a positive integer, got {n}")
    if omega_q <= 0:
        raise PulseError("qubit frequency must be positive")
    return int(n) * TWO_PI / omega_q


@dataclass(frozen=True)
class Segment:
    """One envelope on one bond.

    With ``tone`` the segment is a resonant drive; otherwise it is a DC
    exchange pulse ``level * s(t)`` on top of the residual exchange.
    """

    bond: str
    start: float
    envelope: EnvelopeSpec
    tone: DriveTone | None = None
    level: float = 0.0

    @property
    def stop(self) -> float:
        return self.start + self.envelope.width

    def excess(self, t):
        """Exchange added over the residual value (Hz)."""
        local = np.asarray(t, dtype=float) - self.start
        s = self.envelope(local)
        if self.tone is not None:
            return self.tone.amplitude * s * (1.0 + np.cos(self.tone.carrier * local + self.tone.phase))
        return self.level * s

    def peak(self) -> float:
        return 2.0 * self.tone.amplitude if self.tone is not None else self.level


@dataclass(frozen=True)
class VirtualZ:
    """Frame rotation ``Z(angle) = exp(-i angle sigma_z / 2)`` on one qubit at ``time``."""

    qubit: int
    angle: float
    time: float


@dataclass(frozen=True)
class PulseSchedule:
    """Complete control program of one gate."""

    segments: tuple[Segment, ...]
    virtual_z: tuple[VirtualZ, ...] = ()
    total_duration: float | None = None
    sample_rate: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "virtual_z", tuple(self.virtual_z))
        end = max((s.stop for s in segs), default=0.0)
        if self.total_duration is None:
            object.__setattr__(self, "total_duration", end)
        elif self.total_duration < end - 1e-18:
            raise PulseError("total duration shorter than the last segment")
        by_bond: dict[str, list[Segment]] = {}
        for s in segs:
            if s.start < 0:
                raise PulseError("segments must start at t >= 0")
            by_bond.setdefault(s.bond, []).append(s)
        for bond, items in by_bond.items():
            items.sort(key=lambda s: s.start)
            for a, b in zip(items, items[1:]):
                if b.start < a.stop - 1e-18:
                    raise PulseError(f"overlapping segments on bond {bond}")
            if any(s.peak() < 0 for s in items):
                raise PulseError("negative exchange pulse")

    @property
    def driven_bonds(self) -> tuple[str, ...]:
        return tuple(sorted({s.bond for s in self.segments}))

    def exchange(self, spec: ChainSpec, bond: str, t):
        """Commanded exchange on ``bond`` at times ``t`` (Hz)."""
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, spec.exchange_hz[bond], dtype=float)
        for s in self.segments:
            if s.bond == bond:
                out = out + s.excess(t)
        return out

    def voltage(self, spec: ChainSpec, bond: str, t):
        return voltage_from_exchange(spec.exchange_hz[bond], spec.lever_arm(bond), self.exchange(spec, bond, t))

    def peak_exchange(self, spec: ChainSpec) -> dict[str, float]:
        out = {}
        for bond in self.driven_bonds:
            out[bond] = spec.exchange_hz[bond] + max(s.peak() for s in self.segments if s.bond == bond)
        return out

    def max_carrier(self) -> float:
        return max((s.tone.carrier for s in self.segments if s.tone is not None), default=0.0)

    def z_before(self, time: float | None = None) -> list[VirtualZ]:
        cut = 0.0 if time is None else time
        return [z for z in self.virtual_z if z.time <= cut]

    def z_after(self) -> list[VirtualZ]:
        return [z for z in self.virtual_z if z.time > 0.0]

    def with_virtual_z(self, zs: Iterable[VirtualZ]) -> "PulseSchedule":
        return replace(self, virtual_z=tuple(zs))

    def with_phase(self, phase: float) -> "PulseSchedule":
        """Copy with every drive tone's carrier phase set to ``phase``."""
        segs = [
            replace(s, tone=replace(s.tone, phase=phase)) if s.tone is not None else s
            for s in self.segments
        ]
        return replace(self, segments=tuple(segs))

    def sample(self, spec: ChainSpec, rate: float | None = None) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        rate = rate or self.sample_rate or 100e9
        n = max(int(np.ceil(self.total_duration * rate)), 1)
        t = np.linspace(0.0, self.total_duration, n + 1)
        return t, {b: self.exchange(spec, b, t) for b in self.driven_bonds}

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        segs = []
        for s in self.segments:
            item = {"bond": s.bond, "start": s.start, "width": s.envelope.width,
                    "shape": s.envelope.shape.value}
            if s.tone is not None:
                item["tone"] = {"amplitude_hz": s.tone.amplitude, "carrier_rad_s": s.tone.carrier,
                                "phase": s.tone.phase}
            else:
                item["level_hz"] = s.level
            segs.append(item)
        return {
            "segments": segs,
            "virtual_z": [{"qubit": z.qubit, "angle": z.angle, "time": z.time} for z in self.virtual_z],
            "total_duration": self.total_duration,
            "sample_rate": self.sample_rate,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSchedule":
        segs = []
        for item in data["segments"]:
            env = EnvelopeSpec(item["width"], item.get("shape", "cosine"))
            tone = None
            if "tone" in item:
                t = item["tone"]
                tone = DriveTone(t["amplitude_hz"], t["carrier_rad_s"], t["phase"])
            segs.append(Segment(item["bond"], item["start"], env, tone, item.get("level_hz", 0.0)))
        zs = [VirtualZ(z["qubit"], z["angle"], z["time"]) for z in data.get("virtual_z", [])]
        return cls(tuple(segs), tuple(zs), data.get("total_duration"), data.get("sample_rate"),
                   dict(data.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "PulseSchedule":
        return cls.from_dict(json.loads(text))

    def to_csv(self, spec: ChainSpec, rate: float | None = None) -> str:
        """Sample dump with columns ``t_s, bond, J_hz, V_B_V``."""
        t, waves = self.sample(spec, rate)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t_s", "bond", "J_hz", "V_B_V"])
        for bond, j in waves.items():
            v = voltage_from_exchange(spec.exchange_hz[bond], spec.lever_arm(bond), j)
            for ti, ji, vi in zip(t, j, v):
                writer.writerow([f"{ti:.12e}", bond, f"{ji:.12e}", f"{vi:.12e}"])
        return buf.getvalue()


def drive_schedule(bond: str, width: float, amplitude: float, carrier: float, phase: float = 0.0,
                   start: float = 0.0, virtual_z: Sequence[VirtualZ] = (), **meta) -> PulseSchedule:
    seg = Segment(bond, start, EnvelopeSpec(width), DriveTone(amplitude, carrier, phase))
    return PulseSchedule((seg,), tuple(virtual_z), meta=dict(meta))


def dc_schedule(bonds: Sequence[str], width: float, level: float, start: float = 0.0,
                virtual_z: Sequence[VirtualZ] = (), **meta) -> PulseSchedule:
    segs = tuple(Segment(b, start, EnvelopeSpec(width), None, level) for b in bonds)
    return PulseSchedule(segs, tuple(virtual_z), meta=dict(meta))


def idle_schedule(duration: float) -> PulseSchedule:
    return PulseSchedule((), (), total_duration=duration)
