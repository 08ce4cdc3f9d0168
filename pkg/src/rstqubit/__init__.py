"""Pulse-level simulation of exchange-coupled resonant singlet-triplet spin qubits."""

from .spin_model import (
    ChainSpec,
    EigenStructure,
    Topology,
    build_hamiltonian,
    diagonalize_and_label,
    eigenstructure,
    rotating_frame,
    table1,
    tau_cz,
    zz_interaction,
)
from .pulse import DriveTone, EnvelopeSpec, PulseSchedule, VirtualZ
from .noise import ChargeNoiseSpec, HyperfineSpec, MonteCarloPlan, NoiseRealization
from .dynamics import TimeGrid, propagate

__version__ = "0.1.0"

__all__ = [
    "ChainSpec", "EigenStructure", "Topology", "build_hamiltonian", "diagonalize_and_label",
    "eigenstructure", "rotating_frame", "table1", "tau_cz", "zz_interaction",
    "DriveTone", "EnvelopeSpec", "PulseSchedule", "VirtualZ",
    "ChargeNoiseSpec", "HyperfineSpec", "MonteCarloPlan", "NoiseRealization",
    "TimeGrid", "propagate",
]
