"""Independent dense state-vector helpers for cross-checking the tableau."""

import numpy as np

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])
SDG = np.diag([1, -1j])
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0 + 0j, -1.0])
ONE = {"H": H, "S": S, "SDG": SDG, "X": X, "Y": Y, "Z": Z}


def apply_1q(psi, u, q, n):
    psi = psi.reshape([2] * n)
    psi = np.moveaxis(np.tensordot(u, psi, axes=([1], [q])), 0, q)
    return psi.reshape(-1)


def apply_cx(psi, c, t, n):
    psi = psi.reshape([2] * n).copy()
    idx = [slice(None)] * n
    idx[c] = 1
    sub = psi[tuple(idx)]
    tt = t if t < c else t - 1
    psi[tuple(idx)] = np.flip(sub, axis=tt)
    return psi.reshape(-1)


def apply_gate(psi, name, qubits, n):
    if name == "CX":
        return apply_cx(psi, qubits[0], qubits[1], n)
    if name == "CZ":
        psi = apply_1q(psi, H, qubits[1], n)
        psi = apply_cx(psi, qubits[0], qubits[1], n)
        return apply_1q(psi, H, qubits[1], n)
    return apply_1q(psi, ONE[name], qubits[0], n)


def random_circuit(rng, n, depth):
    ops = []
    for _ in range(depth):
        kind = rng.integers(4)
        if kind == 3 and n > 1:
            c, t = rng.choice(n, 2, replace=False)
            ops.append(("CX", (int(c), int(t))))
        else:
            ops.append((["H", "S", "SDG"][kind % 3], (int(rng.integers(n)),)))
    return ops


def zero_state(n):
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1
    return psi
