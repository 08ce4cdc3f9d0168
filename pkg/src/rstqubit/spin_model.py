"""Static spin-chain Hamiltonians and their labeled eigenstructure.

Conventions
-----------
* Units: every Hamiltonian is returned as ``H / hbar`` in rad/s.  Frequencies
  at the interface are ordinary frequencies: Larmor frequencies are
  ``omega / 2pi`` in Hz and exchanges are ``J / h`` in Hz.
* Spin states are written with ``d`` (spin down) and ``u`` (spin up).  Spin
  down is the Zeeman ground state: ``s^z |d> = +|d>`` so that
  ``-(hbar omega / 2) s^z`` gives it the energy ``-hbar omega / 2``.
* Basis index: site 1 is the most significant bit, ``d`` is bit 0 and ``u``
  is bit 1.  The number of excitations of a product state is its number of
  ``u`` spins.
* The coupler chain orders its sites as ``1 2 3 4 c`` (the coupler last), so a
  label such as ``"duddu"`` reads ``S1 S2 S3 S4 Sc``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Mapping

import numpy as np

TWO_PI = 2.0 * np.pi

# Quasi-static hyperfine offsets enter the Larmor frequency with this weight.
# With it, a Ramsey experiment at sigma = 2pi x 0.04 MHz decays with
# T2* = 1 / (sqrt(2) sigma) = 2.81 us.
HYPERFINE_COUPLING = 2.0


class Topology(str, enum.Enum):
    PAIR = "pair"
    DIRECT4 = "direct4"
    COUPLER5 = "coupler5"


SITES = {
    Topology.PAIR: ("1", "2"),
    Topology.DIRECT4: ("1", "2", "3", "4"),
    Topology.COUPLER5: ("1", "2", "3", "4", "c"),
}

BONDS = {
    Topology.PAIR: ("12",),
    Topology.DIRECT4: ("12", "23", "34"),
    Topology.COUPLER5: ("12", "2c", "3c", "34"),
}

# Computational states, ordered |0>, |1> (pair) or |00>, |01>, |10>, |11>.
COMPUTATIONAL = {
    Topology.PAIR: ("du", "ud"),
    Topology.DIRECT4: ("dudu", "duud", "uddu", "udud"),
    Topology.COUPLER5: ("dudud", "duudd", "uddud", "ududd"),
}

LEAKAGE = {
    Topology.PAIR: (),
    Topology.DIRECT4: ("uudd", "dduu"),
    Topology.COUPLER5: ("udddu", "duddu", "ddudu", "ddduu", "dduud", "uuddd"),
}

QUBIT_SITES = {1: ("1", "2"), 2: ("3", "4")}
QUBIT_BONDS = {1: "12", 2: "34"}


class ChainError(ValueError):
    """Invalid chain parameters."""


class LabelingError(RuntimeError):
    """Raised when an eigenstate cannot be matched to a product state."""

    def __init__(self, label: str, overlap: float):
        super().__init__(f"ambiguous eigenstate for |{label}> (max overlap {overlap:.3f})")
        self.label = label
        self.overlap = overlap


@dataclass(frozen=True)
class ChainSpec:
    """Spin chain parameters.

    Attributes
    ----------
    topology : Topology
    larmor_hz : tuple of float
        Larmor frequencies ``omega_k / 2pi`` in site order.
    exchange_hz : mapping
        Residual exchange ``J^r / h`` per bond key (``"12"``, ``"2c"``, ...).
    alpha : float
        Barrier lever arm in 1/V.
    gamma : float
        Charge lever arm in eV/V.
    """

    topology: Topology
    larmor_hz: tuple[float, ...]
    exchange_hz: Mapping[str, float]
    alpha: float = 11.0
    gamma: float = 0.1
    alpha_per_bond: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        topo = Topology(self.topology)
        object.__setattr__(self, "topology", topo)
        larmor = tuple(float(x) for x in self.larmor_hz)
        object.__setattr__(self, "larmor_hz", larmor)
        if len(larmor) != len(SITES[topo]):
            raise ChainError(
                f"{topo.value} needs {len(SITES[topo])} Larmor frequencies, got {len(larmor)}"
            )
        exchange = {}
        for bond in BONDS[topo]:
            value = float(self.exchange_hz.get(bond, 0.0))
            exchange[bond] = value
        extra = set(self.exchange_hz) - set(BONDS[topo])
        if extra:
            raise ChainError(f"unknown bonds for {topo.value}: {sorted(extra)}")
        object.__setattr__(self, "exchange_hz", exchange)
        values = list(larmor) + list(exchange.values()) + [self.alpha, self.gamma]
        if not np.all(np.isfinite(values)):
            raise ChainError("chain parameters must be finite")
        if any(v < 0 for v in exchange.values()):
            raise ChainError("exchange coupling must be non-negative")
        if self.alpha <= 0 or self.gamma <= 0:
            raise ChainError("lever arms must be positive")

    @property
    def sites(self) -> tuple[str, ...]:
        return SITES[self.topology]

    @property
    def bonds(self) -> tuple[str, ...]:
        return BONDS[self.topology]

    @property
    def n_spins(self) -> int:
        return len(self.sites)

    @property
    def n_qubits(self) -> int:
        return 1 if self.topology is Topology.PAIR else 2

    def lever_arm(self, bond: str) -> float:
        return float(self.alpha_per_bond.get(bond, self.alpha))

    def site_index(self, site: str) -> int:
        return self.sites.index(site)

    def with_exchange(self, **bonds: float) -> "ChainSpec":
        """Copy with some residual exchanges (Hz) replaced, e.g. ``with_exchange(**{"23": 0.4e6})``."""
        merged = dict(self.exchange_hz)
        merged.update(bonds)
        return replace(self, exchange_hz=merged)

    def with_larmor(self, **sites: float) -> "ChainSpec":
        larmor = list(self.larmor_hz)
        for site, value in sites.items():
            larmor[self.site_index(site.lstrip("s"))] = value
        return replace(self, larmor_hz=tuple(larmor))

    def to_dict(self) -> dict:
        return {
            "topology": self.topology.value,
            "larmor_hz": list(self.larmor_hz),
            "exchange_hz": dict(self.exchange_hz),
            "alpha": self.alpha,
            "gamma": self.gamma,
            "alpha_per_bond": dict(self.alpha_per_bond),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ChainSpec":
        if "preset" in data:
            # A named preset, optionally with some fields overridden.
            name = data["preset"]
            if name not in PRESETS:
                raise ChainError(f"unknown chain preset {name!r}")
            base = PRESETS[name](data.get("topology", Topology.DIRECT4)).to_dict()
            exchange = dict(base["exchange_hz"])
            exchange.update(data.get("exchange_hz", {}))
            merged = {**base, **{k: v for k, v in data.items() if k != "preset"}}
            merged["exchange_hz"] = exchange
            data = merged
        return cls(
            topology=Topology(data["topology"]),
            larmor_hz=tuple(data["larmor_hz"]),
            exchange_hz=dict(data.get("exchange_hz", {})),
            alpha=float(data.get("alpha", 11.0)),
            gamma=float(data.get("gamma", 0.1)),
            alpha_per_bond=dict(data.get("alpha_per_bond", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "ChainSpec":
        return cls.from_dict(json.loads(text))


TABLE1_LARMOR_HZ = {"1": 10.75e9, "2": 10.60e9, "3": 10.48e9, "4": 10.35e9, "c": 10.54e9}
TABLE1_EXCHANGE_HZ = {"12": 2e6, "23": 2e6, "34": 2e6, "2c": 12e6, "3c": 12e6}
TABLE1_ALPHA = 11.0  # 0.011 / mV
TABLE1_GAMMA = 0.1  # eV / V


def table1(topology: Topology | str = Topology.DIRECT4) -> ChainSpec:
    """Default parameters of the four- and five-spin chains (and the isolated pair)."""
    topo = Topology(topology)
    return ChainSpec(
        topology=topo,
        larmor_hz=tuple(TABLE1_LARMOR_HZ[s] for s in SITES[topo]),
        exchange_hz={b: TABLE1_EXCHANGE_HZ[b] for b in BONDS[topo]},
        alpha=TABLE1_ALPHA,
        gamma=TABLE1_GAMMA,
    )


PRESETS = {"table1": table1}


# ---------------------------------------------------------------------------
# Basis and operators
# ---------------------------------------------------------------------------


def label_to_index(label: str) -> int:
    """Basis index of a product state written with ``d``/``u`` (site 1 first)."""
    index = 0
    for ch in label:
        if ch not in "du":
            raise ValueError(f"bad spin label {label!r}")
        index = (index << 1) | (ch == "u")
    return index


def index_to_label(index: int, n_spins: int) -> str:
    return "".join("u" if (index >> (n_spins - 1 - k)) & 1 else "d" for k in range(n_spins))


def pretty_label(label: str, topology: Topology | str | None = None) -> str:
    arrows = {"d": "↓", "u": "↑"}
    out = [arrows[c] for c in label]
    if topology is not None and Topology(topology) is Topology.COUPLER5:
        out[-1] = {"d": "⇓", "u": "⇑"}[label[-1]]
    return "|~" + "".join(out) + "⟩"


def spin_z_values(n_spins: int) -> np.ndarray:
    """Array ``(dim, n_spins)`` of s^z eigenvalues (+1 for d, -1 for u)."""
    idx = np.arange(2**n_spins)
    bits = (idx[:, None] >> (n_spins - 1 - np.arange(n_spins))[None, :]) & 1
    return 1.0 - 2.0 * bits


def excitations(n_spins: int) -> np.ndarray:
    return (1.0 - spin_z_values(n_spins)).sum(axis=1).astype(int) // 2


def sector_indices(n_spins: int, n_up: int) -> np.ndarray:
    """Basis indices with ``n_up`` up spins, in ascending order."""
    return np.flatnonzero(excitations(n_spins) == n_up)


def exchange_operator(n_spins: int, k: int, l: int) -> np.ndarray:
    """``(1/4) s_k . s_l`` with Pauli operators, as a dense real matrix."""
    dim = 2**n_spins
    sz = spin_z_values(n_spins)
    op = np.diag(0.25 * sz[:, k] * sz[:, l])
    mask = (1 << (n_spins - 1 - k)) | (1 << (n_spins - 1 - l))
    for i in range(dim):
        if sz[i, k] != sz[i, l]:
            op[i ^ mask, i] = 0.5
    return op


def total_sz(n_spins: int) -> np.ndarray:
    return np.diag(spin_z_values(n_spins).sum(axis=1))


def bond_sites(spec: ChainSpec, bond: str) -> tuple[int, int]:
    return spec.site_index(bond[0]), spec.site_index(bond[1])


def zeeman_diagonal(spec: ChainSpec, delta_omega: np.ndarray | None = None) -> np.ndarray:
    """Diagonal of ``-(1/2) sum_k omega_k s_k^z`` in rad/s.

    ``delta_omega`` holds hyperfine offsets (rad/s) per site; they shift each
    Larmor frequency by ``HYPERFINE_COUPLING * delta_omega``.
    """
    omega = TWO_PI * np.asarray(spec.larmor_hz)
    if delta_omega is not None:
        omega = omega + HYPERFINE_COUPLING * np.asarray(delta_omega, dtype=float)
    return -0.5 * spin_z_values(spec.n_spins) @ omega


def build_hamiltonian(
    spec: ChainSpec,
    exchange_override: Mapping[str, float] | None = None,
    delta_omega: np.ndarray | None = None,
) -> np.ndarray:
    """Static chain Hamiltonian ``H / hbar`` (rad/s) on the full product space.

    Parameters
    ----------
    spec : ChainSpec
    exchange_override : mapping, optional
        Bond exchanges (Hz) replacing the residual values.
    delta_omega : array, optional
        Hyperfine Larmor offsets per site (rad/s).
    """
    exchange = dict(spec.exchange_hz)
    if exchange_override:
        unknown = set(exchange_override) - set(spec.bonds)
        if unknown:
            raise ChainError(f"override references unknown bonds {sorted(unknown)}")
        for bond, value in exchange_override.items():
            value = float(value)
            if not np.isfinite(value):
                raise ChainError("exchange override must be finite")
            if value < 0:
                raise ChainError("exchange coupling must be non-negative")
            exchange[bond] = value
    h = np.diag(zeeman_diagonal(spec, delta_omega)).astype(float)
    for bond, j_hz in exchange.items():
        if j_hz:
            k, l = bond_sites(spec, bond)
            h = h + TWO_PI * j_hz * exchange_operator(spec.n_spins, k, l)
    return h.astype(complex)


def rotating_frame(h: np.ndarray, omega_ref: float) -> np.ndarray:
    """Hamiltonian in the frame rotating uniformly at ``omega_ref`` (rad/s).

    Adds ``(omega_ref / 2) sum_k s_k^z``.  Exchange terms commute with the
    total ``S_z`` and are unchanged.
    """
    n_spins = int(round(np.log2(h.shape[0])))
    return h + 0.5 * omega_ref * total_sz(n_spins)


def mean_qubit_larmor(spec: ChainSpec) -> float:
    """Mean qubit-spin Larmor frequency in rad/s (the default frame reference)."""
    qubit_sites = [i for i, s in enumerate(spec.sites) if s != "c"]
    return TWO_PI * float(np.mean([spec.larmor_hz[i] for i in qubit_sites]))


# ---------------------------------------------------------------------------
# Eigenstructure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenStructure:
    """Labeled eigenpairs of a static chain Hamiltonian.

    ``energies`` are ascending (rad/s); column ``i`` of ``vectors`` is the
    eigenvector of ``energies[i]``.  ``labels`` maps a product-state label to
    its eigen index; eigenvector phases are fixed so that the overlap with
    the labeling product state is real and positive.
    """

    energies: np.ndarray
    vectors: np.ndarray
    labels: dict[str, int]
    topology: Topology

    def index(self, label: str) -> int:
        try:
            return self.labels[label]
        except KeyError:
            raise LabelingError(label, 0.0) from None

    def energy(self, label: str) -> float:
        return float(self.energies[self.index(label)])

    def vector(self, label: str) -> np.ndarray:
        return self.vectors[:, self.index(label)]

    def computational_vectors(self) -> np.ndarray:
        """Columns are the dressed computational states, in qubit order."""
        return np.stack([self.vector(lab) for lab in COMPUTATIONAL[self.topology]], axis=1)

    def computational_energies(self) -> np.ndarray:
        return np.array([self.energy(lab) for lab in COMPUTATIONAL[self.topology]])


def diagonalize_and_label(h: np.ndarray, spec: ChainSpec, validate: bool | str = True) -> EigenStructure:
    """Diagonalize ``h`` sector by sector and label eigenvectors by product states.

    Within each total-S_z sector, product states and eigenvectors are paired
    greedily by descending overlap ``|<product|eig>|^2`` (ties go to the lower
    eigen index).  With ``validate`` an assignment with overlap <= 0.5 raises
    :class:`LabelingError`; ``validate="computational"`` checks only the
    computational states, for strongly driven chains whose leakage states mix.
    """
    checked = set(COMPUTATIONAL[spec.topology]) if validate == "computational" else None
    n = spec.n_spins
    dim = 2**n
    if h.shape != (dim, dim):
        raise ChainError(f"Hamiltonian has shape {h.shape}, expected {(dim, dim)}")
    exc = excitations(n)
    all_e = []
    all_v = []
    all_lab = []
    for n_up in range(n + 1):
        idx = np.flatnonzero(exc == n_up)
        block = h[np.ix_(idx, idx)]
        evals, evecs = np.linalg.eigh(block)
        overlap = np.abs(evecs) ** 2  # rows: product states, cols: eigenvectors
        m = len(idx)
        order = sorted(
            ((overlap[p, e], -e, p, e) for p in range(m) for e in range(m)),
            key=lambda t: (t[0], t[1]),
            reverse=True,
        )
        used_p, used_e = set(), set()
        assign = {}
        for ov, _, p, e in order:
            if p in used_p or e in used_e:
                continue
            assign[e] = (p, ov)
            used_p.add(p)
            used_e.add(e)
            if len(assign) == m:
                break
        for e in range(m):
            p, ov = assign[e]
            label = index_to_label(int(idx[p]), n)
            if validate and ov <= 0.5 and (checked is None or label in checked):
                raise LabelingError(label, float(ov))
            vec = np.zeros(dim, dtype=complex)
            vec[idx] = evecs[:, e]
            phase = vec[idx[p]]
            vec *= np.conj(phase) / abs(phase)
            all_e.append(evals[e])
            all_v.append(vec)
            all_lab.append(label)
    order = np.argsort(all_e, kind="stable")
    energies = np.asarray(all_e)[order]
    vectors = np.stack([all_v[i] for i in order], axis=1)
    labels = {all_lab[i]: k for k, i in enumerate(order)}
    return EigenStructure(energies=energies, vectors=vectors, labels=labels, topology=spec.topology)


def eigenstructure(spec: ChainSpec, exchange_override: Mapping[str, float] | None = None,
                   validate: bool | str = True) -> EigenStructure:
    return diagonalize_and_label(build_hamiltonian(spec, exchange_override), spec, validate)


def zz_interaction(es: EigenStructure) -> float:
    """ZZ strength ``E11 + E00 - E10 - E01`` in rad/s."""
    if es.topology is Topology.PAIR:
        raise ChainError("a single pair has no ZZ interaction")
    e00, e01, e10, e11 = es.computational_energies()
    return float(e11 + e00 - e10 - e01)


def tau_cz(es: EigenStructure) -> float:
    """Leakage-dynamics period used for commensurate CZ pulses (seconds).

    Direct chain: ``2pi / (|E_uudd - E11| + |E_dduu - E00|)``, pairing each
    leakage state with the computational state it is exchange-coupled to.
    Coupler chain: inverse mean gap over the four coupler-excited leakage
    states and the computational states they couple to.
    """
    e = es.energy
    if es.topology is Topology.DIRECT4:
        gap = abs(e("uudd") - e("udud")) + abs(e("dduu") - e("dudu"))
        return TWO_PI / gap
    if es.topology is Topology.COUPLER5:
        gap = (
            abs(e("udddu") - e("ududd"))
            + abs(e("ddduu") - e("dudud"))
            + abs(e("duddu") - e("uddud"))
            + abs(e("ddudu") - e("uddud"))
        ) / 4.0
        return TWO_PI / gap
    raise ChainError("tau_cz needs a two-qubit chain")


def qubit_frequency(es: EigenStructure, qubit: int = 1) -> float:
    """Dressed transition frequency (rad/s) of ``qubit`` with the other qubit in |0>."""
    energies = es.computational_energies()
    if es.topology is Topology.PAIR:
        if qubit != 1:
            raise ChainError("a pair has only qubit 1")
        return float(energies[1] - energies[0])
    if qubit == 1:
        return float(energies[2] - energies[0])
    if qubit == 2:
        return float(energies[1] - energies[0])
    raise ChainError(f"no qubit {qubit}")


def frame_energies(es: EigenStructure) -> np.ndarray:
    """Energies defining the independent-qubit frame on the computational states.

    The frame removes each qubit's own precession (with the other qubit in
    |0>) but keeps the ZZ interaction, so residual ZZ shows up as error.
    """
    e = es.computational_energies()
    if es.topology is Topology.PAIR:
        return e.copy()
    w1 = e[2] - e[0]
    w2 = e[1] - e[0]
    return np.array([e[0], e[0] + w2, e[0] + w1, e[0] + w1 + w2])


def pair_spec(spec: ChainSpec, qubit: int = 1) -> ChainSpec:
    """The isolated two-spin chain of one qubit."""
    sites = QUBIT_SITES[qubit]
    return ChainSpec(
        topology=Topology.PAIR,
        larmor_hz=tuple(spec.larmor_hz[spec.site_index(s)] for s in sites),
        exchange_hz={"12": spec.exchange_hz[QUBIT_BONDS[qubit]]},
        alpha=spec.lever_arm(QUBIT_BONDS[qubit]),
        gamma=spec.gamma,
    )


def two_excitation_labels(topology: Topology) -> list[str]:
    n = len(SITES[topology])
    out = []
    for ups in combinations(range(n), 2):
        out.append("".join("u" if k in ups else "d" for k in range(n)))
    return out


def track_computational(spec: ChainSpec, overrides: list[Mapping[str, float]]) -> tuple[np.ndarray, np.ndarray]:
    """Follow the dressed computational states through a sequence of exchange settings.

    The first setting is labeled by :func:`diagonalize_and_label`; every later
    one assigns each tracked state the eigenvector of largest overlap with its
    predecessor.  This stays continuous where the states hybridize too strongly
    for product-state labeling.

    Returns
    -------
    energies : array, shape (n_settings, 2^n_qubits)
        Computational energies (rad/s) in qubit order.
    vectors : array, shape (n_settings, 2^n_spins, 2^n_qubits)
    """
    labels = COMPUTATIONAL[spec.topology]
    idx = sector_indices(spec.n_spins, labels[0].count("u"))
    es = eigenstructure(spec, overrides[0])
    prev = es.computational_vectors()[idx]
    energies = [es.computational_energies()]
    vectors = [es.computational_vectors()]
    for override in overrides[1:]:
        h = build_hamiltonian(spec, override)[np.ix_(idx, idx)]
        evals, evecs = np.linalg.eigh(h)
        ov = np.abs(prev.conj().T @ evecs) ** 2
        pick = np.empty(len(labels), dtype=int)
        taken: set[int] = set()
        for q in np.argsort(-ov.max(axis=1)):
            order = [e for e in np.argsort(-ov[q]) if e not in taken]
            pick[q] = order[0]
            taken.add(order[0])
        cur = evecs[:, pick]
        phase = np.sum(prev.conj() * cur, axis=0)
        cur = cur * (np.conj(phase) / np.abs(phase))
        full = np.zeros((2**spec.n_spins, len(labels)), dtype=complex)
        full[idx] = cur
        energies.append(evals[pick])
        vectors.append(full)
        prev = cur
    return np.asarray(energies), np.asarray(vectors)
