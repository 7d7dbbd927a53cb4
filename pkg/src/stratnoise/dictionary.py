"""The single-qubit stabilizer-channel dictionary.

33 entries: the 24 single-qubit Clifford unitaries (entry 0 is the
identity, entries 1-3 the Paulis X, Y, Z), three non-selective Pauli
dephasing channels and six measure-and-reset channels.  Cliffords are stored
as H/S words found by breadth-first search, so applying one is a short gate
sequence on the tableau.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .pauli import PauliString
from .tableau import Tableau, TableauError

AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class StabilizerChannelId:
    kind: str  # "clifford" | "dephase" | "reset"
    index: int = 0
    axis: str = "Z"
    sign: int = 1

    def __post_init__(self):
        if self.kind == "clifford":
            if not 0 <= self.index < 24:
                raise ValueError(f"Clifford index {self.index} out of range")
        elif self.kind in ("dephase", "reset"):
            if self.axis not in AXES:
                raise ValueError(f"bad axis {self.axis!r}")
            if self.kind == "reset" and self.sign not in (1, -1):
                raise ValueError("reset sign must be +1 or -1")
        else:
            raise ValueError(f"unknown stabilizer channel kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "clifford":
            return clifford_names()[self.index]
        if self.kind == "dephase":
            return f"Dephase({self.axis})"
        return f"Reset({'+' if self.sign > 0 else '-'}{self.axis})"


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _images(word) -> tuple[str, str]:
    t = Tableau(1)
    for g in word:
        t.gate(g, 0)
    return str(t.row(0)), str(t.row(1))


@lru_cache(maxsize=None)
def clifford_words() -> tuple[tuple[str, ...], ...]:
    """Shortest H/S words for the 24 single-qubit Cliffords.

    Order: identity, X, Y, Z, then the remaining 20 in search order.
    """
    seen = {_images(()): ()}
    queue = deque([()])
    while queue:
        w = queue.popleft()
        for g in ("H", "S"):
            nw = w + (g,)
            key = _images(nw)
            if key not in seen:
                seen[key] = nw
                queue.append(nw)
    if len(seen) != 24:  # pragma: no cover
        raise TableauError(f"found {len(seen)} Cliffords, expected 24")
    paulis = {_images((p,)): p for p in ("X", "Y", "Z")}
    ordered = [()]
    for p in ("X", "Y", "Z"):
        key = next(k for k, v in paulis.items() if v == p)
        ordered.append(seen[key])
    pauli_keys = set(paulis)
    for key, w in seen.items():
        if w and key not in pauli_keys:
            ordered.append(w)
    return tuple(ordered)


@lru_cache(maxsize=None)
def clifford_names() -> tuple[str, ...]:
    names = ["I", "X", "Y", "Z"]
    for w in clifford_words()[4:]:
        names.append("".join(w))
    return tuple(names)


def clifford_unitary(index: int) -> np.ndarray:
    """Matrix of Clifford ``index``; words act left to right in time."""
    u = np.eye(2, dtype=complex)
    for g in clifford_words()[index]:
        u = (_H if g == "H" else _S) @ u
    return u


@lru_cache(maxsize=None)
def dictionary() -> tuple[StabilizerChannelId, ...]:
    ids = [StabilizerChannelId("clifford", i) for i in range(24)]
    ids += [StabilizerChannelId("dephase", axis=a) for a in AXES]
    ids += [StabilizerChannelId("reset", axis=a, sign=s) for a in AXES for s in (1, -1)]
    return tuple(ids)


IDENTITY = 0


def index_of(cid: StabilizerChannelId) -> int:
    return dictionary().index(cid)


def _eigenprojector(axis: str, sign: int) -> np.ndarray:
    return (np.eye(2) + sign * _PAULI[axis]) / 2


def channel_kraus(cid: StabilizerChannelId) -> list[np.ndarray]:
    """Kraus operators of a dictionary channel."""
    if cid.kind == "clifford":
        return [clifford_unitary(cid.index)]
    if cid.kind == "dephase":
        return [_eigenprojector(cid.axis, 1), _eigenprojector(cid.axis, -1)]
    flip = _PAULI["Z"] if cid.axis == "X" else _PAULI["X"]
    return [_eigenprojector(cid.axis, cid.sign), flip @ _eigenprojector(cid.axis, -cid.sign)]


# Tableau application; one compiled op list per dictionary index.

_PAULI_OPS = {1: "X", 2: "Y", 3: "Z"}


@lru_cache(maxsize=None)
def _compiled() -> tuple:
    ops = []
    for i, cid in enumerate(dictionary()):
        if cid.kind == "clifford":
            if i in _PAULI_OPS:
                ops.append(("gates", (_PAULI_OPS[i],)))
            else:
                ops.append(("gates", clifford_words()[i]))
        elif cid.kind == "dephase":
            ops.append(("dephase", cid.axis))
        else:
            ops.append(("reset", (cid.axis, cid.sign)))
    return tuple(ops)


_FAST = {
    "H": Tableau.h, "S": Tableau.s, "X": Tableau.x, "Y": Tableau.y, "Z": Tableau.z,
}


def apply_index(t: Tableau, index: int, qubit: int, rng) -> None:
    """Apply dictionary entry ``index`` to ``qubit`` (hot path, no validation)."""
    kind, data = _compiled()[index]
    if kind == "gates":
        for g in data:
            _FAST[g](t, qubit)
    elif kind == "dephase":
        if data == "Z":
            t.measure_z(qubit, rng)
        else:
            t.measure(PauliString.single(t.n, qubit, data), rng)
    else:
        axis, sign = data
        if axis == "Z":
            if t.measure_z(qubit, rng) != sign:
                t.x(qubit)
        else:
            t.reset(PauliString.single(t.n, qubit, axis), sign, rng)


def apply_stabilizer_channel(t: Tableau, cid: StabilizerChannelId, qubit: int, rng) -> Tableau:
    if not 0 <= qubit < t.n:
        raise TableauError(f"qubit {qubit} out of range for n={t.n}")
    try:
        index = index_of(cid)
    except ValueError:
        raise TableauError(f"unknown stabilizer channel {cid}") from None
    apply_index(t, index, qubit, rng)
    return t
