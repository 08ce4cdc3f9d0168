"""Built-in experiment presets, one per reproduced figure.

Each preset is a list of panel configurations in the JSON form accepted by
:func:`~rstqubit.experiments.config_from_dict`.  Noisy panels default to 64
realizations per point; ``paper_scale`` raises this to 512.  Sweep ranges
that are only readable from plots are listed under ``reconstructed``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .experiments import ExperimentConfig, config_from_dict
from .spin_model import pair_spec, table1

DEFAULT_REALIZATIONS = 64
PAPER_REALIZATIONS = 512


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    panels: tuple[dict, ...]

    def configs(self, realizations: int | None = None, paper_scale: bool = False) -> list[ExperimentConfig]:
        n = realizations if realizations is not None else (PAPER_REALIZATIONS if paper_scale else None)
        out = []
        for panel in self.panels:
            data = dict(panel)
            data.setdefault("realizations", DEFAULT_REALIZATIONS)
            if n is not None:
                data["realizations"] = n
            out.append(config_from_dict(data))
        return out


def _chain(topology: str) -> dict:
    return {"preset": "table1", "topology": topology}


def _pair() -> dict:
    return pair_spec(table1("direct4"), 1).to_dict()


def _span(start, stop, num) -> dict:
    return {"start": start, "stop": stop, "num": num}


SIGMAS_HZ = [0.01e6, 0.02e6, 0.03e6, 0.04e6, 0.05e6, 0.06e6, 0.08e6, 0.1e6]

_PRESETS = [
    Preset("fig1c", "ZZ interaction of the direct four-spin chain against J23", (
        {"name": "fig1c", "gate": "zz", "chain": _chain("direct4"),
         "sweep": [{"path": "exchange.23", **_span(0.0, 4e6, 41)}],
         "reconstructed": ["exchange.23 range 0-4 MHz"]},
    )),
    Preset("fig2", "Bloch trajectories of R(pi/2, pi/4) at 3.3, 4 and 20 Larmor periods", tuple(
        {"name": f"fig2{tag}", "gate": "bloch", "chain": _pair(),
         "params": {"n": n, "phi": float(np.pi / 4), "calibration": "transfer"}}
        for tag, n in (("b", 3.3), ("c", 4.0), ("d", 20.0))
    )),
    Preset("fig3bc", "Coherent X(pi/2) error against carrier phase and pulse width", (
        {"name": "fig3b", "gate": "x90", "chain": _pair(), "params": {"calibration": "transfer"},
         "sweep": [{"path": "gate.phi", **_span(0.0, float(np.pi), 9)},
                   {"path": "gate.n", **_span(3.0, 10.0, 57)}],
         "reconstructed": ["gate.phi grid 0-pi in 9 steps", "gate.n range 3-10"]},
        {"name": "fig3c", "gate": "x90", "chain": _pair(), "params": {"calibration": "transfer"},
         "sweep": [{"path": "gate.phi", "values": [0.0, float(np.pi / 4), float(np.pi / 2)]},
                   {"path": "gate.n", **_span(3.0, 10.0, 141)}],
         "reconstructed": ["phase cuts 0, pi/4, pi/2", "gate.n range 3-10"]},
    )),
    Preset("fig4", "Error budget of the commensurate X(pi/2) against width and J_intra", (
        {"name": "fig4", "gate": "x90", "chain": _pair(),
         "params": {"calibration": "refine"},
         "noise": {"charge": True, "sigma_hz": 0.05e6, "channels": "budget"},
         "sweep": [{"path": "exchange.12", "values": [0.5e6, 1e6, 2e6, 4e6]},
                   {"path": "gate.n", "values": [3, 4, 5, 6, 8, 10, 12, 15, 20]}],
         "reconstructed": ["J_intra values 0.5-4 MHz", "gate.n values 3-20"]},
    )),
    Preset("fig5a-d", "Direct-coupling CZ budgets and X(pi/2) crosstalk", (
        {"name": "fig5a", "gate": "cz", "chain": {**_chain("direct4"), "exchange_hz": {"23": 0.4e6}},
         "params": {"refine": True}, "noise": {"charge": True, "sigma_hz": 0.04e6},
         "sweep": [{"path": "noise.sigma_hz", "values": [0.01e6, 0.02e6, 0.04e6, 0.06e6, 0.08e6]},
                   {"path": "gate.n", "values": [1, 2, 3, 4, 5, 6, 8, 10]}],
         "reconstructed": ["sigma range 0.01-0.08 MHz", "gate.n values 1-10"]},
        {"name": "fig5b", "gate": "cz", "chain": _chain("direct4"), "params": {"refine": True},
         "noise": {"charge": True, "sigma_hz": 0.04e6},
         "sweep": [{"path": "exchange.inter", "values": [0.1e6, 0.2e6, 0.4e6, 0.8e6, 1.6e6]},
                   {"path": "gate.n", "values": [1, 2, 3, 4, 5, 6, 8, 10]}],
         "reconstructed": ["J_inter values 0.1-1.6 MHz", "gate.n values 1-10"]},
        {"name": "fig5c", "gate": "cz", "chain": {**_chain("direct4"), "exchange_hz": {"23": 0.4e6}},
         "params": {"refine": True}, "noise": {"channels": ["coherent"]},
         "sweep": [{"path": "gate.n", "values": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]}],
         "reconstructed": ["gate.n values 1-10"]},
        {"name": "fig5d", "gate": "x90", "chain": _chain("direct4"), "params": {"n": 10, "reference": "pair"},
         "noise": {"charge": True, "sigma_hz": 0.04e6},
         "sweep": [{"path": "noise.sigma_hz", "values": [0.01e6, 0.02e6, 0.04e6, 0.06e6, 0.08e6]},
                   {"path": "exchange.inter", "values": [0.0, 0.03e6, 0.06e6, 0.12e6, 0.24e6, 0.5e6, 1e6]}],
         "reconstructed": ["sigma range 0.01-0.08 MHz", "J_inter values 0-1 MHz"]},
    )),
    Preset("fig6cd", "Coupler ZZ interaction against coupler frequency and J_inter", (
        {"name": "fig6c", "gate": "zz", "chain": _chain("coupler5"),
         "sweep": [{"path": "exchange.inter", "values": [3e6, 6e6, 12e6, 24e6]},
                   {"path": "larmor.c", **_span(10.30e9, 10.80e9, 101)}],
         "reconstructed": ["coupler frequency 10.30-10.80 GHz", "J_inter values 3-24 MHz"]},
        {"name": "fig6d", "gate": "zz", "chain": _chain("coupler5"), "params": {"mode": "full"},
         "sweep": [{"path": "exchange.inter", "values": [6e6, 12e6]},
                   {"path": "larmor.c", **_span(10.30e9, 10.80e9, 101)}],
         "reconstructed": ["coupler frequency 10.30-10.80 GHz", "cuts at 6 and 12 MHz"]},
    )),
    Preset("fig7a-f", "Coupler-assisted X(pi/2) and CZ budgets", (
        {"name": "fig7a-direct", "gate": "x90", "chain": _chain("direct4"), "params": {"n": 15},
         "sweep": [{"path": "exchange.inter", "values": [0.5e6, 1e6, 2e6, 4e6]}],
         "reconstructed": ["J_inter values 0.5-4 MHz"]},
        {"name": "fig7a-coupler", "gate": "x90", "chain": _chain("coupler5"), "params": {"n": 15},
         "sweep": [{"path": "exchange.inter", "values": [0.5e6, 1e6, 2e6, 4e6, 8e6, 12e6]}],
         "reconstructed": ["J_inter values 0.5-12 MHz"]},
        {"name": "fig7b", "gate": "x90", "chain": _chain("coupler5"), "params": {"n": 15},
         "noise": {"charge": True, "sigma_hz": 0.04e6},
         "sweep": [{"path": "noise.sigma_hz", "values": [0.02e6, 0.04e6, 0.06e6]},
                   {"path": "exchange.inter", "values": [1e6, 2e6, 4e6, 8e6, 12e6, 16e6]}],
         "reconstructed": ["sigma values 0.02-0.06 MHz", "J_inter values 1-16 MHz"]},
        {"name": "fig7c", "gate": "cz", "chain": _chain("coupler5"), "params": {"refine": True},
         "noise": {"charge": True, "sigma_hz": 0.04e6},
         "sweep": [{"path": "noise.sigma_hz", "values": [0.01e6, 0.02e6, 0.04e6, 0.06e6]},
                   {"path": "gate.n", "values": [1, 2, 3, 4, 5, 6, 8]}],
         "reconstructed": ["sigma values 0.01-0.06 MHz", "gate.n values 1-8"]},
        {"name": "fig7d", "gate": "cz", "chain": _chain("coupler5"), "params": {"refine": True},
         "noise": {"charge": True, "sigma_hz": 0.04e6, "channels": "budget"},
         "sweep": [{"path": "gate.n", "values": [1, 2, 3, 4, 5, 6, 8]}],
         "reconstructed": ["gate.n values 1-8"]},
        {"name": "fig7e", "gate": "cz", "chain": _chain("coupler5"), "params": {"refine": True},
         "noise": {"charge": True, "sigma_hz": 0.04e6},
         "sweep": [{"path": "exchange.inter", "values": [0.25e6, 0.5e6, 1e6, 2e6, 4e6]},
                   {"path": "gate.n", "values": [1, 2, 3, 4, 5, 6, 8]}],
         "reconstructed": ["J_inter values 0.25-4 MHz", "gate.n values 1-8"]},
        {"name": "fig7f", "gate": "cz", "chain": _chain("coupler5"), "params": {"refine": True},
         "noise": {"channels": ["coherent"]},
         "sweep": [{"path": "gate.n", "values": [1, 2, 3, 4, 5, 6, 7, 8]}],
         "reconstructed": ["gate.n values 1-8"]},
    )),
    Preset("ramsey-fig8", "Single-spin Ramsey T2* against hyperfine noise strength", (
        {"name": "fig8b", "gate": "ramsey", "chain": _pair(),
         "sweep": [{"path": "noise.sigma_hz", "values": SIGMAS_HZ}],
         "reconstructed": ["sigma values 0.01-0.1 MHz"]},
        {"name": "fig8c", "gate": "ramsey", "chain": _pair(), "params": {"output": "trace"},
         "noise": {"sigma_hz": 0.04e6}},
    )),
]

PRESETS = {p.name: p for p in _PRESETS}


def list_presets() -> list[tuple[str, str, int]]:
    """``(name, description, default realizations)`` for every built-in preset."""
    return [(p.name, p.description, DEFAULT_REALIZATIONS) for p in _PRESETS]


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
