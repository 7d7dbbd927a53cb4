"""Rotated planar surface-code memory experiment.

Layout (``y`` grows downwards): data qubits sit at odd coordinates
``(2i+1, 2j+1)``, measure qubits at even coordinates.  X checks carry the
weight-2 boundary checks on the top and bottom edges, Z checks on the left and
right, so the logical X is a column of X and the logical Z a row of Z.

One cycle, all checks in parallel:

    R a, N;  H a (X) / I a (Z), N;  4 CNOT steps, N on every qubit after each;
    H a (X) / I a (Z), N;  N, M a

X checks use the ancilla as control (order NW, NE, SW, SE), Z checks use it as
target (order NW, SW, NE, SE), so hook errors lie across the logical of the
same type.  The code state is prepared noiselessly, ``d`` noisy cycles follow,
then noise on every data qubit and an ideal round of stabilizer measurements
stands in for the final data readout.  Decoding runs over the ``d + 1``
detector layers and the correction is applied to the state before readout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..circuit import CircuitError, CircuitSpec, FaultConfiguration, run_configuration
from ..pauli import PauliString
from . import logical
from .decoders import DetectorGraph, decoder_for

X_ORDER = ((-1, -1), (1, -1), (-1, 1), (1, 1))
Z_ORDER = ((-1, -1), (-1, 1), (1, -1), (1, 1))
BASES = ("Z", "X", "choi")


@dataclass
class SurfaceLayout:
    d: int
    data: list  # coordinates, index = qubit
    x_checks: list  # (coordinate, qubit, data qubits in CNOT order with None for idle steps)
    z_checks: list
    ref: int | None = None
    schedule: list = field(default_factory=list)  # per CNOT step: [(control, target)]

    @property
    def t(self) -> int:
        return (self.d - 1) // 2

    @property
    def n_physical(self) -> int:
        return len(self.data) + len(self.x_checks) + len(self.z_checks)

    @property
    def checks(self) -> list:
        """All checks, X type first: ``(kind, qubit, data support)``."""
        out = [("X", q, [p for p in sup if p is not None]) for _, q, sup in self.x_checks]
        out += [("Z", q, [p for p in sup if p is not None]) for _, q, sup in self.z_checks]
        return out

    @property
    def ancillas(self) -> list:
        return [q for _, q, _ in self.x_checks] + [q for _, q, _ in self.z_checks]

    def stabilizers(self, n: int) -> list:
        return [PauliString.from_sparse(n, {p: kind for p in sup}) for kind, _, sup in self.checks]

    def logical_operators(self, n: int):
        d = self.d
        xbar = PauliString.from_sparse(n, {j * d: "X" for j in range(d)})  # left column
        zbar = PauliString.from_sparse(n, {i: "Z" for i in range(d)})  # top row
        return xbar, zbar

    def to_dict(self) -> dict:
        return {"d": self.d, "data": self.data,
                "x_checks": [[list(c), q, sup] for c, q, sup in self.x_checks],
                "z_checks": [[list(c), q, sup] for c, q, sup in self.z_checks],
                "ref": self.ref, "schedule": self.schedule}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def surface_layout(d: int, with_ref: bool = False) -> SurfaceLayout:
    if d < 3 or d % 2 == 0:
        raise CircuitError(f"distance must be odd and at least 3, got {d}")
    data = [(2 * i + 1, 2 * j + 1) for j in range(d) for i in range(d)]
    index = {c: q for q, c in enumerate(data)}
    x_checks, z_checks = [], []
    q = len(data)
    for y in range(0, 2 * d + 1, 2):
        for x in range(0, 2 * d + 1, 2):
            kind = "X" if ((x + y) // 2) % 2 == 1 else "Z"
            bulk = 0 < x < 2 * d and 0 < y < 2 * d
            if not bulk:
                edge_x = y in (0, 2 * d) and 0 < x < 2 * d
                edge_z = x in (0, 2 * d) and 0 < y < 2 * d
                if not ((edge_x and kind == "X") or (edge_z and kind == "Z")):
                    continue
            order = X_ORDER if kind == "X" else Z_ORDER
            sup = [index.get((x + dx, y + dy)) for dx, dy in order]
            (x_checks if kind == "X" else z_checks).append(((x, y), q, sup))
            q += 1
    layout = SurfaceLayout(d, data, x_checks, z_checks, ref=q if with_ref else None)
    for step in range(4):
        pairs = [(a, sup[step]) for _, a, sup in x_checks if sup[step] is not None]
        pairs += [(sup[step], a) for _, a, sup in z_checks if sup[step] is not None]
        used = [p for pair in pairs for p in pair]
        if len(used) != len(set(used)):
            raise CircuitError("CNOT schedule touches a qubit twice in one step")
        layout.schedule.append(pairs)
    return layout


def locations_per_cycle(d: int) -> int:
    """Independent count: four ancilla locations plus one per qubit per CNOT step."""
    n_anc = d * d - 1
    return 4 * n_anc + 4 * (2 * d * d - 1)


def _cycle_ops(layout: SurfaceLayout, a: int, cycle: int):
    ops = []
    anc = layout.ancillas
    xs = {q for _, q, _ in layout.x_checks}
    for q in anc:
        ops += [("R", q), ("N", a, q)]
        a += 1
    for q in anc:
        if q in xs:
            ops.append(("G", "H", (q,)))
        ops.append(("N", a, q))
        a += 1
    everyone = list(range(len(layout.data))) + anc
    for pairs in layout.schedule:
        ops += [("G", "CX", p) for p in pairs]
        for q in everyone:
            ops.append(("N", a, q))
            a += 1
    for q in anc:
        if q in xs:
            ops.append(("G", "H", (q,)))
        ops.append(("N", a, q))
        a += 1
    n_s = len(anc)
    for s, q in enumerate(anc):
        ops += [("N", a, q), ("M", q, cycle * n_s + s)]
        a += 1
    return ops, a


def memory_ops(layout: SurfaceLayout, n: int, cycles: int | None = None):
    """Noisy cycles, final data noise and the ideal round; returns ``(ops, A)``."""
    cycles = layout.d if cycles is None else cycles
    ops, a = [], 0
    for c in range(cycles):
        more, a = _cycle_ops(layout, a, c)
        ops += more
    for q in range(len(layout.data)):
        ops.append(("N", a, q))
        a += 1
    n_s = len(layout.ancillas)
    for s, g in enumerate(layout.stabilizers(n)):
        ops.append(("MP", g, cycles * n_s + s))
    return ops, a


# ----------------------------------------------------------------------
# single-fault effects by bit-sliced Pauli-frame propagation


def _unpack(v: int, n: int) -> np.ndarray:
    raw = np.frombuffer(v.to_bytes((n + 7) // 8 or 1, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def single_fault_effects(circuit: CircuitSpec, qubits=None):
    """Propagate an X and a Z fault from every noise location in parallel.

    Fault ``2a`` is X at location ``a``, fault ``2a + 1`` is Z.  Returns
    ``(flips, rx, rz)``: measurement flips ``(2A, n_keys)`` and the residual
    X / Z parts on ``qubits`` at the end of the circuit.
    """
    n = circuit.n
    xs = [0] * n
    zs = [0] * n
    flips = [0] * circuit.n_keys
    for op in circuit.ops:
        kind = op[0]
        if kind == "N":
            a, q = op[1], op[2]
            xs[q] |= 1 << (2 * a)
            zs[q] |= 1 << (2 * a + 1)
        elif kind == "G":
            name, qs = op[1].upper(), op[2]
            if name == "H":
                q = qs[0]
                xs[q], zs[q] = zs[q], xs[q]
            elif name in ("S", "SDG"):
                zs[qs[0]] ^= xs[qs[0]]
            elif name in ("CX", "CNOT"):
                c, t = qs
                xs[t] ^= xs[c]
                zs[c] ^= zs[t]
            elif name == "CZ":
                a_, b_ = qs
                zs[a_] ^= xs[b_]
                zs[b_] ^= xs[a_]
            elif name == "SWAP":
                a_, b_ = qs
                xs[a_], xs[b_] = xs[b_], xs[a_]
                zs[a_], zs[b_] = zs[b_], zs[a_]
            elif name not in ("X", "Y", "Z", "I", "ID"):
                raise CircuitError(f"frame propagation does not know gate {name}")
        elif kind == "M":
            flips[op[2]] ^= xs[op[1]]
        elif kind == "MP":
            p, v = op[1], 0
            for q in p.support():
                letter = p.letter(q)
                if letter in "XY":
                    v ^= zs[q]
                if letter in "ZY":
                    v ^= xs[q]
            flips[op[2]] ^= v
        elif kind == "R":
            xs[op[1]] = zs[op[1]] = 0
        elif kind == "F":
            raise CircuitError("frame propagation does not support feedback")
    nf = 2 * circuit.A
    qubits = range(n) if qubits is None else qubits
    F = np.array([_unpack(v, nf) for v in flips]).T if flips else np.zeros((nf, 0), bool)
    rx = np.array([_unpack(xs[q], nf) for q in qubits]).T
    rz = np.array([_unpack(zs[q], nf) for q in qubits]).T
    return F, rx, rz


def build_detector_graphs(circuit: CircuitSpec, layout: SurfaceLayout, cycles: int):
    """Two detector graphs: Z checks (X errors) and X checks (Z errors)."""
    nd = len(layout.data)
    n_x = len(layout.x_checks)
    n_s = len(layout.ancillas)
    flips, rx, rz = single_fault_effects(circuit, range(nd))
    layers = flips.reshape(len(flips), cycles + 1, n_s)
    det = layers.copy()
    det[:, 1:] ^= layers[:, :-1]
    xbar, zbar = layout.logical_operators(nd)
    x_sup = np.zeros(nd, bool)
    x_sup[xbar.support()] = True
    z_sup = np.zeros(nd, bool)
    z_sup[zbar.support()] = True
    graphs = {}
    # X errors: seen by Z checks, flip the logical Z readout when crossing a row
    graphs["X"] = DetectorGraph.from_mechanisms(
        det[:, :, n_x:], rx, (rx & z_sup).sum(axis=1) % 2 == 1, cycles + 1, n_s - n_x, kind="X")
    graphs["Z"] = DetectorGraph.from_mechanisms(
        det[:, :, :n_x], rz, (rz & x_sup).sum(axis=1) % 2 == 1, cycles + 1, n_x, kind="Z")
    return graphs


@dataclass
class MemoryDecoding:
    """Post-processing hook: detectors from the record, decode, apply the correction."""

    layout: SurfaceLayout
    graphs: dict
    cycles: int
    decoder: str = "uf"
    n: int = 0

    def __post_init__(self):
        self._decode = decoder_for(self.decoder)

    def detectors(self, record) -> np.ndarray:
        n_s = len(self.layout.ancillas)
        m = np.asarray(record[: (self.cycles + 1) * n_s], dtype=bool).reshape(self.cycles + 1, n_s)
        det = m.copy()
        det[1:] ^= m[:-1]
        return det

    def correction(self, record):
        """``(x_mask, z_mask)`` over data qubits."""
        det = self.detectors(record)
        n_x = len(self.layout.x_checks)
        cx = self._decode(self.graphs["X"], det[:, n_x:])
        cz = self._decode(self.graphs["Z"], det[:, :n_x])
        return cx, cz

    def __call__(self, t, record, rng):
        cx, cz = self.correction(record)
        for q in np.flatnonzero(cx):
            t.x(int(q))
        for q in np.flatnonzero(cz):
            t.z(int(q))


def build_surface_memory(d: int, basis: str = "Z", decoder: str = "uf", cycles: int | None = None):
    """Memory experiment as ``(CircuitSpec, SurfaceLayout, graphs)``.

    ``basis`` is ``Z`` (readout ``<Z_L>`` from ``|0_L>``), ``X`` (``<X_L>``
    from ``|+_L>``) or ``choi`` (twelve logical-map expectations through a
    reference qubit Bell-paired with the code).  ``graphs`` maps ``X`` / ``Z``
    to the detector graph decoding that error type.
    """
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}")
    layout = surface_layout(d, with_ref=basis == "choi")
    cycles = d if cycles is None else cycles
    n = layout.n_physical + (1 if basis == "choi" else 0)
    xbar, zbar = layout.logical_operators(n)
    stabs = layout.stabilizers(n)
    gens = stabs + [PauliString.single(n, q, "Z") for q in layout.ancillas]
    ops, A = memory_ops(layout, n, cycles)
    n_keys = (cycles + 1) * len(layout.ancillas)
    meta = {"protocol": "surface", "d": d, "basis": basis, "t": layout.t, "decoder": decoder,
            "cycles": cycles}
    if basis == "choi":
        gens = gens + logical.bell_generators(layout.ref, xbar, zbar)
        obs = logical.choi_observables(layout.ref, xbar, zbar)
        w, c = logical.average_fidelity_weights()
        meta.update(score=[w.tolist(), c], ideal_readout=logical.ideal_readout().tolist(),
                    plateau_readout=[0.0] * 12)
    else:
        lop = zbar if basis == "Z" else xbar
        gens = gens + [lop]
        obs = [lop]
        meta.update(score=[[0.5], 0.5], ideal_readout=[1.0], plateau_readout=[0.0])
    spec = CircuitSpec(n=n, ops=ops, A=A, rho_terms=[(1.0, gens)], observables=obs, n_keys=n_keys,
                       name=f"surface-d{d}-{basis}", meta=meta)
    graphs = build_detector_graphs(spec, layout, cycles)
    spec.postprocess = MemoryDecoding(layout, graphs, cycles, decoder, n)
    return spec, layout, graphs


def run_memory_sample(spec: CircuitSpec, layout: SurfaceLayout, graphs, config: FaultConfiguration, rng) -> np.ndarray:
    """Readout of one fault configuration, decoded with ``spec``'s decoder."""
    return run_configuration(spec, config, rng).f


def perfect_measurement_corrects(layout: SurfaceLayout, err, kind: str = "X", decoder: str = "mwpm") -> bool:
    """Decode a data error pattern of ``kind`` from one perfect syndrome; ``True`` if no logical flip."""
    nd = len(layout.data)
    err = np.asarray(err, dtype=bool)
    checks = [sup for k, _, sup in layout.checks if k != kind]
    graph = code_capacity_graph(layout, kind)
    syn = np.array([err[sup].sum() % 2 for sup in checks], dtype=bool)[None, :]
    resid = err ^ decoder_for(decoder)(graph, syn)
    xbar, zbar = layout.logical_operators(nd)
    crossing = zbar if kind == "X" else xbar
    return bool(resid[crossing.support()].sum() % 2 == 0)


def code_capacity_graph(layout: SurfaceLayout, kind: str = "X") -> DetectorGraph:
    """One-layer graph for data errors of ``kind`` with perfect measurements."""
    nd = len(layout.data)
    checks = [sup for k, _, sup in layout.checks if k != kind]
    det = np.zeros((nd, 1, len(checks)), bool)
    for s, sup in enumerate(checks):
        det[sup, 0, s] = True
    resid = np.eye(nd, dtype=bool)
    xbar, zbar = layout.logical_operators(nd)
    crossing = zbar if kind == "X" else xbar
    flips = np.zeros(nd, bool)
    flips[crossing.support()] = True
    return DetectorGraph.from_mechanisms(det, resid, flips, 1, len(checks), kind=kind)
