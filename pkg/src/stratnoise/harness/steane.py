"""Steane [[7,1,3]] memory protocol.

Noiseless encoding, one noisy idle step on the seven data qubits, three
noisy rounds of the six syndrome circuits (one reused ancilla, noise at every
single-qubit location), then an ideal round of syndrome measurement and
recovery.

Syndrome circuits:

    X-type:  R a, N, H a, N, CX a->d (x4), H a, N, N, M a
    Z-type:  R a, N, CX d->a (x4), N, M a

Each round ends with Hamming-lookup recovery from its six bits.  Qubits are
data 0-6, ancilla 7 and, in the logical-map readout, reference 8.
"""

from __future__ import annotations

import numpy as np

from ..circuit import CircuitSpec
from ..pauli import PauliString
from . import logical

HAMMING = ((3, 4, 5, 6), (1, 2, 5, 6), (0, 2, 4, 6))  # qubit q has syndrome q + 1
DATA = tuple(range(7))
ANCILLA = 7
REF = 8
ROUNDS = 3
LABELS = ("+Z", "-Z", "+X", "-X", "+Y", "-Y")


def _lookup(bits) -> int:
    """Qubit flagged by a 3-bit Hamming syndrome (``-1`` for none)."""
    s = bits[0] * 4 + bits[1] * 2 + bits[2]
    return s - 1


def _recover(bits):
    """Six bits (X-type checks first) -> recovery gates."""
    gates = []
    qz = _lookup(bits[:3])
    if qz >= 0:
        gates.append(("Z", (qz,)))
    qx = _lookup(bits[3:])
    if qx >= 0:
        gates.append(("X", (qx,)))
    return gates


def stabilizers(n: int) -> list:
    out = []
    for kind in "XZ":
        for supp in HAMMING:
            out.append(PauliString.from_sparse(n, {q: kind for q in supp}))
    return out


def logical_operators(n: int):
    return (PauliString.from_sparse(n, {q: "X" for q in DATA}),
            PauliString.from_sparse(n, {q: "Z" for q in DATA}))


def steane_ops(with_final: bool = True):
    """Operation list and location count ``A = 7 + 3 * 18``."""
    ops = []
    a = 0
    for q in DATA:
        ops.append(("N", a, q))
        a += 1
    for _ in range(ROUNDS):
        key = 0
        for supp in HAMMING:  # X-type checks
            ops += [("R", ANCILLA), ("N", a, ANCILLA), ("G", "H", (ANCILLA,)), ("N", a + 1, ANCILLA)]
            ops += [("G", "CX", (ANCILLA, q)) for q in supp]
            ops += [("G", "H", (ANCILLA,)), ("N", a + 2, ANCILLA), ("N", a + 3, ANCILLA), ("M", ANCILLA, key)]
            a += 4
            key += 1
        for supp in HAMMING:  # Z-type checks
            ops += [("R", ANCILLA), ("N", a, ANCILLA)]
            ops += [("G", "CX", (q, ANCILLA)) for q in supp]
            ops += [("N", a + 1, ANCILLA), ("M", ANCILLA, key)]
            a += 2
            key += 1
        ops += [("F", _recover, tuple(range(6))), ("D", tuple(range(6)))]
    return ops, a


def _final_round(n: int):
    ops = []
    for key, g in enumerate(stabilizers(n)):
        ops.append(("MP", g, key))
    ops += [("F", _recover, tuple(range(6))), ("D", tuple(range(6)))]
    return ops


def build_steane_protocol(input_state=None) -> CircuitSpec:
    """The Steane memory protocol.

    ``input_state`` is one of ``+Z, -Z, +X, -X, +Y, -Y`` (readout: fidelity
    with that logical state), or ``None`` for the logical-map readout through
    a reference qubit (twelve expectations, see ``logical``).
    """
    choi = input_state is None
    n = 9 if choi else 8
    xbar, zbar = logical_operators(n)
    ops, A = steane_ops()
    ops = ops + [("R", ANCILLA)] + _final_round(n)
    meta = {"protocol": "steane", "t": 1, "input": input_state or "choi"}
    if choi:
        gens = stabilizers(n) + logical.bell_generators(REF, xbar, zbar)
        gens.append(PauliString.single(n, ANCILLA, "Z"))
        obs = logical.choi_observables(REF, xbar, zbar)
        w, c = logical.average_fidelity_weights()
        meta.update(score=[w.tolist(), c], ideal_readout=logical.ideal_readout().tolist(),
                    plateau_readout=[0.0] * 12)
        spec = CircuitSpec(n=n, ops=ops, A=A, rho_terms=[(1.0, gens)], observables=obs,
                           n_keys=6, name="steane-choi", meta=meta)
    else:
        if input_state not in LABELS:
            raise ValueError(f"input state must be one of {LABELS}")
        gens = stabilizers(n) + [logical.state_generator(input_state, xbar, zbar)]
        gens.append(PauliString.single(n, ANCILLA, "Z"))
        meta.update(score=[[1.0], 0.0], ideal_readout=[1.0], plateau_readout=[0.5])
        spec = CircuitSpec(n=n, ops=ops, A=A, rho_terms=[(1.0, gens)], target=gens,
                           n_keys=6, name=f"steane-{input_state}", meta=meta)
    return spec
