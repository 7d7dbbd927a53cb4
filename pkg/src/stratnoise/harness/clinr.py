"""Clifford noise reduction (CliNR) by teleportation through checked resource states.

The target Clifford circuit on ``n`` qubits is cut into ``t`` subcircuits.
For each one, ``n`` Bell pairs ``(a_i, b_i)`` are prepared, the subcircuit is
applied to the ``a`` half, and ``r`` random stabilizers of the resulting state
are measured through one check ancilla.  The subcircuit is then teleported
into the computational register by Bell measurements between the register and
the ``b`` half, with the Pauli correction conjugated through the subcircuit.
The ``a`` half becomes the new register.

Restart-until-pass is simulated by one attempt per subcircuit and a readout
``[f * acc, acc]``: attempts are independent, so the fidelity conditioned on
all checks passing is the ratio of the two expectations.

Fidelity is the overlap of the output with the circuit's Choi state, taken
through ``n`` noiseless reference qubits.  Noise follows every gate on each
qubit it touches and every reset, and precedes every measurement; Pauli
corrections are classical frame updates and carry no noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..circuit import CircuitError, CircuitSpec, conjugate_pauli
from ..pauli import PauliString

CLIFFORD_1Q = ("H", "S", "SDG", "X", "Y", "Z")
CLIFFORD_2Q = ("CX", "CZ", "SWAP")
_LETTER_GATE = {"X": "X", "Y": "Y", "Z": "Z"}


@dataclass
class ClinrSpec:
    s: int
    n: int
    t_parts: int
    r: int
    omega_g_max: float
    omega_g: float
    log_base: float = 2.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_count(s: int, n: int, base: float = 2.0) -> int:
    """``r = floor(log(s / n))`` checks per subcircuit, never negative."""
    if s <= 0 or n <= 0:
        raise ValueError("gate and qubit counts must be positive")
    return max(int(math.floor(math.log(s / n, base) + 1e-12)), 0)


def random_clifford_circuit(n: int, s: int, rng) -> list:
    """``s`` gates drawn uniformly from H, S, CX on random qubits."""
    gates = []
    for _ in range(s):
        kind = rng.integers(3) if n > 1 else rng.integers(2)
        if kind == 0:
            gates.append(("H", (int(rng.integers(n)),)))
        elif kind == 1:
            gates.append(("S", (int(rng.integers(n)),)))
        else:
            a, b = rng.choice(n, size=2, replace=False)
            gates.append(("CX", (int(a), int(b))))
    return gates


def _validate(circuit) -> int:
    n = 0
    for name, qs in circuit:
        name = name.upper()
        if name not in CLIFFORD_1Q + CLIFFORD_2Q:
            raise CircuitError(f"{name} is not a supported Clifford gate")
        n = max(n, max(qs) + 1)
    return n


def _split(circuit, t: int):
    edges = np.linspace(0, len(circuit), t + 1).round().astype(int)
    return [circuit[a:b] for a, b in zip(edges[:-1], edges[1:])]


class _Builder:
    def __init__(self):
        self.ops = []
        self.a = 0
        self.key = 0

    def noise(self, *qs):
        for q in qs:
            self.ops.append(("N", self.a, q))
            self.a += 1

    def gate(self, name, qs, noisy=True):
        self.ops.append(("G", name, tuple(qs)))
        if noisy:
            self.noise(*qs)

    def reset(self, q, noisy=True):
        self.ops.append(("R", q))
        if noisy:
            self.noise(q)

    def measure(self, q) -> int:
        self.noise(q)
        k = self.key
        self.ops.append(("M", q, k))
        self.key += 1
        return k


class _Correction:
    """Feedback: Pauli correction on the new register from Bell outcomes."""

    def __init__(self, x_images, z_images):
        self.x_images = x_images  # image of X_i for a flip of the b outcome
        self.z_images = z_images  # image of Z_i for a flip of the register outcome
        self.__qualname__ = "clinr_correction"

    def __call__(self, bits):
        n = len(self.x_images)
        p = None
        for i in range(n):
            if bits[n + i]:
                p = self.x_images[i] if p is None else p * self.x_images[i]
            if bits[i]:
                p = self.z_images[i] if p is None else p * self.z_images[i]
        if p is None:
            return []
        return [(_LETTER_GATE[p.letter(q)], (q,)) for q in p.support()]


def _on(n_total, mapping, gates):
    return [(name, tuple(mapping[q] for q in qs)) for name, qs in gates]


def _stabilizer_check(b: _Builder, p: PauliString, check: int):
    b.reset(check)
    b.gate("H", (check,))
    for q in p.support():
        letter = p.letter(q)
        if letter == "X":
            b.gate("CX", (check, q))
        elif letter == "Z":
            b.gate("CZ", (check, q))
        else:
            b.gate("SDG", (q,))
            b.gate("CX", (check, q))
            b.gate("S", (q,))
    b.gate("H", (check,))
    return b.measure(check)


class _Acceptance:
    """``[f, ...] -> [f * acc, acc]`` with ``acc = 1`` when every check matched its sign."""

    def __init__(self, keys, expected):
        self.keys = np.asarray(keys, dtype=np.int64)
        self.expected = np.asarray(expected, dtype=np.int8)

    def __call__(self, values, record):
        acc = float(np.all(record[self.keys] == self.expected)) if len(self.keys) else 1.0
        return np.array([values[0] * acc, acc])


def gate_overhead(ops, s: int) -> float:
    """Gates of one CliNR pass (Pauli frame updates excluded) over the ``s`` bare gates."""
    return sum(1 for op in ops if op[0] == "G") / s


def build_clinr(circuit, omega_g_max: float = 2.0, mode: str = "clinr", seed: int = 0,
                log_base: float = 2.0, t_parts: int | None = None):
    """``(ClinrSpec, CircuitSpec)`` for a gate list ``[(name, qubits), ...]``.

    ``mode`` is ``clinr`` or ``none`` (the bare noisy circuit).  Without an
    explicit ``t_parts`` the largest subcircuit count meeting the gate-overhead
    cap is used.
    """
    circuit = [(g.upper(), tuple(int(q) for q in qs)) for g, qs in circuit]
    n = _validate(circuit)
    s = len(circuit)
    if s == 0:
        raise CircuitError("empty circuit")
    r = check_count(s, n, log_base)
    if mode == "none":
        return ClinrSpec(s, n, 0, r, omega_g_max, 1.0, log_base), _build_none(circuit, n)
    if mode != "clinr":
        raise ValueError("mode must be 'clinr' or 'none'")
    if t_parts is None:
        best = None
        for t in range(1, s + 1):
            spec, cs = _build_clinr(circuit, n, t, r, seed, omega_g_max, log_base)
            if spec.omega_g > omega_g_max:
                break
            best = spec, cs
        if best is None:
            raise CircuitError(f"no partition meets the gate-overhead cap {omega_g_max}")
        return best
    spec, cs = _build_clinr(circuit, n, t_parts, r, seed, omega_g_max, log_base)
    if spec.omega_g > omega_g_max:
        raise CircuitError(f"gate overhead {spec.omega_g:.2f} exceeds {omega_g_max}")
    return spec, cs


def _choi_target(n_total, circuit, n, reg, ref, junk):
    gens = []
    for i in range(n):
        for letter in "XZ":
            p = conjugate_pauli(PauliString.single(n_total, i, letter), circuit)
            p = PauliString(n_total, _remap(p.x, reg), _remap(p.z, reg), p.phase)
            gens.append(p * PauliString.single(n_total, ref[i], letter))
    gens += [PauliString.single(n_total, q, "Z") for q in junk]
    return gens


def _remap(bits: int, reg) -> int:
    out = 0
    for i, q in enumerate(reg):
        if bits >> i & 1:
            out |= 1 << q
    return out


def _initial(n_total, n, reg, ref, others):
    gens = []
    for i in range(n):
        gens.append(PauliString.from_sparse(n_total, {reg[i]: "X", ref[i]: "X"}))
        gens.append(PauliString.from_sparse(n_total, {reg[i]: "Z", ref[i]: "Z"}))
    gens += [PauliString.single(n_total, q, "Z") for q in others]
    return gens


def _build_none(circuit, n):
    n_total = 2 * n
    reg, ref = list(range(n)), list(range(n, 2 * n))
    b = _Builder()
    for name, qs in circuit:
        b.gate(name, qs)
    target = _choi_target(n_total, circuit, n, reg, ref, [])
    meta = {"protocol": "clinr", "mode": "none", "n": n, "s": len(circuit), "t": 0,
            "score": [[1.0, 0.0], 0.0], "ideal_readout": [1.0, 1.0], "plateau_readout": [0.0, 1.0]}
    return CircuitSpec(n=n_total, ops=b.ops, A=b.a, rho_terms=[(1.0, _initial(n_total, n, reg, ref, []))],
                       target=target, finalize=_Acceptance([], []), readout_dim=2, name=f"clinr-none-n{n}",
                       meta=meta)


def _build_clinr(circuit, n, t, r, seed, omega_g_max, log_base):
    rng = np.random.default_rng(seed)
    n_total = 4 * n + 1
    banks = [list(range(0, n)), list(range(n, 2 * n)), list(range(2 * n, 3 * n))]
    ref = list(range(3 * n, 4 * n))
    check = 4 * n
    reg, a_bank, b_bank = banks
    init = _initial(n_total, n, reg, ref, a_bank + b_bank + [check])
    b = _Builder()
    check_keys, expected = [], []
    parts = _split(circuit, t)
    for part in parts:
        for q in a_bank + b_bank:
            b.reset(q)
        for i in range(n):
            b.gate("H", (a_bank[i],))
            b.gate("CX", (a_bank[i], b_bank[i]))
        mapped = _on(n_total, a_bank, part)
        for name, qs in mapped:
            b.gate(name, qs)
        gens = []
        for i in range(n):
            for letter in "XZ":
                img = conjugate_pauli(PauliString.single(n_total, a_bank[i], letter), mapped)
                gens.append(img * PauliString.single(n_total, b_bank[i], letter))
        for _ in range(r):
            mask = rng.integers(0, 2, size=2 * n)
            if not mask.any():
                mask[rng.integers(2 * n)] = 1
            p = None
            for g, m in zip(gens, mask):
                if m:
                    p = g if p is None else p * g
            check_keys.append(_stabilizer_check(b, p.unsigned(), check))
            expected.append(1 if p.sign < 0 else 0)
        # Bell measurement of register and b half; output lands on the a half
        keys = []
        for i in range(n):
            b.gate("CX", (reg[i], b_bank[i]))
            b.gate("H", (reg[i],))
        for i in range(n):
            keys.append(b.measure(reg[i]))
        for i in range(n):
            keys.append(b.measure(b_bank[i]))
        x_img = [conjugate_pauli(PauliString.single(n_total, a_bank[i], "X"), mapped) for i in range(n)]
        z_img = [conjugate_pauli(PauliString.single(n_total, a_bank[i], "Z"), mapped) for i in range(n)]
        b.ops.append(("F", _Correction(x_img, z_img), tuple(keys)))
        b.ops.append(("D", tuple(keys)))
        reg, a_bank, b_bank = a_bank, reg, b_bank
    junk = sorted(set(range(3 * n)) - set(reg)) + [check]
    for q in junk:
        b.reset(q, noisy=False)
    target = _choi_target(n_total, circuit, n, reg, ref, junk)
    omega = gate_overhead(b.ops, len(circuit))
    spec = ClinrSpec(len(circuit), n, t, r, omega_g_max, omega, log_base)
    meta = {"protocol": "clinr", "mode": "clinr", "n": n, "s": len(circuit), "t": 0, "t_parts": t, "r": r,
            "score": [[1.0, 0.0], 0.0], "ideal_readout": [1.0, 1.0], "plateau_readout": [0.0, 0.0]}
    cs = CircuitSpec(n=n_total, ops=b.ops, A=b.a, rho_terms=[(1.0, init)], target=target, n_keys=b.key,
                     finalize=_Acceptance(check_keys, expected), readout_dim=2, name=f"clinr-n{n}-t{t}",
                     meta=meta)
    return spec, cs


def conditional_fidelity(f, cov=None):
    """``(F, std)`` of ``E[f acc] / E[acc]`` with a delta-method error bar."""
    num, den = float(f[0]), float(f[1])
    if den <= 0:
        return float("nan"), float("nan")
    F = num / den
    if cov is None:
        return F, 0.0
    g = np.array([1.0 / den, -num / den ** 2])
    return F, float(np.sqrt(max(g @ np.asarray(cov) @ g, 0.0)))
