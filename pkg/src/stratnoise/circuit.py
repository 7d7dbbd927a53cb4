"""Circuit description with tagged noise locations, and single-sample execution.

A ``CircuitSpec`` is a flat list of operations:

    ("G", name, qubits)   ideal Clifford gate
    ("N", a, q)           noise location ``a`` (0-based) acting on qubit ``q``
    ("M", q, key)         Z measurement of ``q``; bit stored at ``record[key]``
    ("MP", pauli, key)    measurement of a Pauli operator
    ("R", q)              noiseless reset of ``q`` to |0>
    ("F", fn, keys)       feedback: ``fn(bits)`` returns ``[(gate, qubits), ...]``
    ("D", keys)           the listed record bits are no longer needed

Noise locations follow gates and precede measurements, so a faulty location
simply inserts its sampled stabilizer channel at that point of the list.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dictionary import apply_index
from .pauli import PauliString
from .tableau import Tableau, TableauError

_GATE_FN = {
    "H": Tableau.h, "S": Tableau.s, "SDG": Tableau.sdg, "X": Tableau.x, "Y": Tableau.y,
    "Z": Tableau.z, "CX": Tableau.cx, "CNOT": Tableau.cx, "CZ": Tableau.cz, "SWAP": Tableau.swap,
}


class CircuitError(ValueError):
    pass


@dataclass
class CircuitSpec:
    n: int
    ops: list
    A: int
    rho_terms: list  # [(coefficient, [PauliString generators])]
    observables: list = field(default_factory=list)
    target: Optional[list] = None  # generators of a stabilizer state to overlap with
    postprocess: Optional[Callable] = None  # (tableau, record, rng) -> None
    finalize: Optional[Callable] = None  # (values, record) -> values
    n_keys: int = 0
    name: str = "circuit"
    meta: dict = field(default_factory=dict)
    readout_dim: Optional[int] = None  # length after ``finalize`` when it changes the size

    def __post_init__(self):
        seen = np.zeros(self.A, dtype=np.int64)
        for op in self.ops:
            if op[0] == "N":
                if not 0 <= op[1] < self.A:
                    raise CircuitError(f"noise tag {op[1]} outside 0..{self.A - 1}")
                seen[op[1]] += 1
        if self.A and not np.all(seen == 1):
            raise CircuitError("every noise location must appear exactly once")
        if not self.rho_terms:
            raise CircuitError("circuit needs an initial state")
        self._prepared = [Tableau.from_stabilizers(g) for _, g in self.rho_terms]
        self._target = Tableau.from_stabilizers(self.target) if self.target is not None else None
        self._compiled = _compile(self.ops)

    @property
    def noise_qubits(self) -> np.ndarray:
        """Qubit acted on by each noise location."""
        out = np.empty(self.A, dtype=np.int64)
        for op in self.ops:
            if op[0] == "N":
                out[op[1]] = op[2]
        return out

    @property
    def readout_size(self) -> int:
        if self.readout_dim is not None:
            return self.readout_dim
        return len(self.observables) + (1 if self.target is not None else 0)

    def initial_tableau(self, term: int = 0) -> Tableau:
        return self._prepared[term].copy()

    def hash(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps({"name": self.name, "n": self.n, "A": self.A, "meta": self.meta}, sort_keys=True).encode())
        for op in self.ops:
            h.update(_op_key(op).encode())
        return h.hexdigest()[:16]


def _op_key(op) -> str:
    if op[0] == "F":
        return f"F:{getattr(op[1], '__qualname__', 'fn')}:{op[2]};"
    if op[0] == "MP":
        return f"MP:{op[1]}:{op[2]};"
    return ":".join(map(str, op)) + ";"


def _compile(ops):
    out = []
    for op in ops:
        kind = op[0]
        if kind == "G":
            name = op[1].upper()
            if name in ("I", "ID"):
                continue
            if name not in _GATE_FN:
                raise CircuitError(f"unknown gate {op[1]!r}")
            out.append((0, _GATE_FN[name], tuple(op[2])))
        elif kind == "N":
            out.append((1, op[1], op[2]))
        elif kind == "M":
            out.append((2, op[1], op[2]))
        elif kind == "MP":
            out.append((3, op[1], op[2]))
        elif kind == "R":
            out.append((4, op[1], None))
        elif kind == "F":
            out.append((5, op[1], tuple(op[2])))
        elif kind == "D":
            continue
        else:
            raise CircuitError(f"unknown op kind {kind!r}")
    return tuple(out)


# ----------------------------------------------------------------------
# noise layout and fault configurations


@dataclass
class NoiseLayout:
    """Per-location decompositions: ``channel_of[a]`` indexes ``decomps``."""

    decomps: list
    channel_of: np.ndarray

    def __post_init__(self):
        self.channel_of = np.asarray(self.channel_of, dtype=np.int64)
        if self.A < 1:
            raise CircuitError("a layout needs at least one location")
        if self.channel_of.min() < 0 or self.channel_of.max() >= len(self.decomps):
            raise CircuitError("channel index out of range")

    @classmethod
    def homogeneous(cls, decomp, A: int) -> "NoiseLayout":
        return cls([decomp], np.zeros(A, dtype=np.int64))

    @property
    def A(self) -> int:
        return len(self.channel_of)

    @property
    def gammas(self) -> np.ndarray:
        g = np.array([d.gamma for d in self.decomps])
        return g[self.channel_of]

    @property
    def is_homogeneous(self) -> bool:
        g = self.gammas
        return bool(np.all(g == g[0]))

    def hash(self) -> str:
        """Identity of the law of fault configurations given ``k``.

        It depends on each channel's signed type distribution and on the
        location odds only up to a common scale, so layouts that differ in
        overall strength alone (e.g. any two depolarizing strengths) share
        pools exactly.
        """
        h = hashlib.sha256()
        for d in self.decomps:
            r = np.asarray(d.fault_r, dtype=float)
            h.update(np.asarray(d.fault_index, dtype=np.int64).tobytes())
            h.update(np.round(r / max(np.abs(r).sum(), 1e-300), 12).tobytes())
        g = self.gammas
        odds = np.where(g < 1, g / np.where(g < 1, 1 - g, 1), np.inf)
        top = odds.max() if np.isfinite(odds).all() and odds.max() > 0 else 1.0
        h.update(np.round(odds / top, 12).tobytes())
        h.update(self.channel_of.tobytes())
        return h.hexdigest()[:16]


@dataclass
class FaultConfiguration:
    locations: np.ndarray
    choices: np.ndarray
    sign: int = 1
    boundary: tuple = (0, -1)

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=np.int64)
        self.choices = np.asarray(self.choices, dtype=np.int64)
        if len(self.locations) != len(self.choices):
            raise CircuitError("one fault choice per faulty location")
        if len(self.locations) > 1 and np.any(np.diff(self.locations) <= 0):
            raise CircuitError("fault locations must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.locations)


@dataclass
class SamplePoint:
    config: FaultConfiguration
    f: np.ndarray


# ----------------------------------------------------------------------
# execution


def execute(circuit: CircuitSpec, faults: dict, rng, term: int = 0):
    """Run ``circuit`` with ``faults = {location: dictionary index}``.

    Returns ``(tableau, record)``.
    """
    t = circuit.initial_tableau(term)
    record = np.zeros(circuit.n_keys, dtype=np.int8)
    for code, a, b in circuit._compiled:
        if code == 0:
            a(t, *b)
        elif code == 1:
            if faults and a in faults:
                apply_index(t, faults[a], b, rng)
        elif code == 2:
            record[b] = t.measure_z(a, rng) < 0
        elif code == 3:
            record[b] = t.measure(a, rng)[0] < 0
        elif code == 4:
            t.reset_z(a, rng)
        else:
            for name, qs in a(tuple(int(record[k]) for k in b)):
                _GATE_FN[name](t, *qs)
    return t, record


def readout(circuit: CircuitSpec, t: Tableau, record, rng) -> np.ndarray:
    if circuit.postprocess is not None:
        circuit.postprocess(t, record, rng)
    vals = [float(t.expectation(p)) for p in circuit.observables]
    if circuit._target is not None:
        vals.append(t.overlap(circuit._target))
    out = np.array(vals)
    if circuit.finalize is not None:
        out = np.asarray(circuit.finalize(out, record), dtype=float)
    return out


def run_configuration(circuit: CircuitSpec, config: FaultConfiguration, rng) -> SamplePoint:
    """Simulate one fault configuration and return its readout ``f``."""
    faults = dict(zip(config.locations.tolist(), config.choices.tolist()))
    if faults and max(faults) >= circuit.A:
        raise CircuitError("fault location outside the circuit")
    term = config.boundary[0] if len(circuit.rho_terms) > 1 else 0
    t, record = execute(circuit, faults, rng, term)
    return SamplePoint(config, readout(circuit, t, record, rng))


# ----------------------------------------------------------------------
# Pauli propagation through ideal gates


def conjugate_pauli(p: PauliString, gates: Sequence) -> PauliString:
    """Image ``U p U^dag`` for the gate list ``[(name, qubits), ...]`` (unsigned
    Paulis are tracked with their sign)."""
    n = p.n
    t = Tableau(n)
    # use a tableau whose first stabilizer row is p: easier to reuse gate code
    x, z, r = p.x, p.z, p.xz_phase()
    t._set_row(n, x, z, r)
    for name, qs in gates:
        name = name.upper()
        if name in ("I", "ID"):
            continue
        _GATE_FN[name](t, *qs)
    x, z, r = t._row(n)
    return PauliString(n, x, z, (r - (x & z).bit_count()) % 4)


def ideal_final_state(circuit: CircuitSpec, rng=None) -> Tableau:
    """Noiseless run; random measurement outcomes use ``rng``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    t, _ = execute(circuit, {}, rng)
    return t


def check_qubits(circuit: CircuitSpec):
    for op in circuit.ops:
        qs = ()
        if op[0] == "G":
            qs = op[2]
        elif op[0] in ("N", "M", "R"):
            qs = (op[2],) if op[0] == "N" else (op[1],)
        for q in qs:
            if not 0 <= q < circuit.n:
                raise TableauError(f"qubit {q} out of range in {op}")
