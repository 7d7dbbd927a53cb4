"""Dense ground truth: density-matrix evolution and exhaustive stratum sums.

The density matrix is kept as a tensor with one row and one column axis per
*active* qubit.  A qubit that is measured and later reset is traced out right
after the measurement and re-enters as |0><0| at the reset, so circuits that
reuse one ancilla never hold it between uses.  Measurements whose bits feed a
classical ``F`` op split the state into branches keyed by the recorded bits;
a ``D`` op forgets bits and merges branches that became identical.
"""

from __future__ import annotations

import itertools
from math import comb

import numpy as np

from . import dictionary as _dict
from .channels import KrausChannel
from .circuit import CircuitSpec, NoiseLayout, execute, readout

MAX_QUBITS = 12

_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.diag([1, 1j]),
    "SDG": np.diag([1, -1j]),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0 + 0j, -1.0]),
}
_CX = np.eye(4, dtype=complex)[[0, 1, 3, 2]].reshape(2, 2, 2, 2)
_CZ = np.diag([1, 1, 1, -1]).astype(complex).reshape(2, 2, 2, 2)
_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]].reshape(2, 2, 2, 2)
_2Q = {"CX": _CX, "CNOT": _CX, "CZ": _CZ, "SWAP": _SWAP}


class OracleError(ValueError):
    pass


class DenseState:
    """Unnormalized density tensor over the active qubits."""

    def __init__(self, rho: np.ndarray, active: list):
        self.rho = rho
        self.active = list(active)

    @classmethod
    def from_vector(cls, psi: np.ndarray, n: int) -> "DenseState":
        v = psi.reshape((2,) * n)
        rho = np.multiply.outer(v, v.conj())
        return cls(rho, list(range(n)))

    @property
    def m(self) -> int:
        return len(self.active)

    def copy(self) -> "DenseState":
        return DenseState(self.rho.copy(), self.active)

    def trace(self) -> float:
        d = 1 << self.m
        return float(np.trace(self.rho.reshape(d, d)).real)

    def matrix(self, order=None) -> np.ndarray:
        """Density matrix with qubits in ``order`` (default ascending)."""
        order = sorted(self.active) if order is None else order
        m = self.m
        perm = [self.active.index(q) for q in order]
        t = self.rho.transpose(perm + [m + p for p in perm])
        d = 1 << m
        return t.reshape(d, d)

    def axis(self, q: int) -> int:
        try:
            return self.active.index(q)
        except ValueError:
            self.activate(q)
            return self.m - 1

    def activate(self, q: int):
        zero = np.zeros((2, 2), dtype=complex)
        zero[0, 0] = 1.0
        m = self.m
        t = np.multiply.outer(self.rho, zero)  # axes: rows, cols, new_row, new_col
        perm = list(range(m)) + [2 * m] + list(range(m, 2 * m)) + [2 * m + 1]
        self.rho = t.transpose(perm)
        self.active.append(q)

    # -- operations --------------------------------------------------------

    def _left(self, u, axes):
        k = len(axes)
        t = np.tensordot(u, self.rho, axes=(list(range(k, 2 * k)), axes))
        return np.moveaxis(t, list(range(k)), axes)

    def apply(self, u: np.ndarray, qubits):
        """``rho -> U rho U^dag`` for a 1- or 2-qubit ``U`` in tensor form."""
        axes = [self.axis(q) for q in qubits]
        m = self.m
        k = len(axes)
        ut = u.reshape((2,) * (2 * k))
        self.rho = self._left(ut, axes)
        t = np.tensordot(self.rho, ut.conj(), axes=([m + a for a in axes], list(range(k, 2 * k))))
        self.rho = np.moveaxis(t, list(range(2 * m - k, 2 * m)), [m + a for a in axes])

    def kraus(self, ops, q: int):
        if len(ops) == 1:
            self.apply(ops[0], [q])
            return
        self.axis(q)  # activate before branching so every branch sees the same shape
        base = self.rho
        acc = None
        for k in ops:
            self.rho = base
            self.apply(k, [q])
            acc = self.rho if acc is None else acc + self.rho
        self.rho = acc

    def project(self, q: int, bit: int, drop: bool) -> "DenseState":
        a = self.axis(q)
        m = self.m
        idx = [slice(None)] * (2 * m)
        if drop:
            idx[a] = bit
            idx[m + a] = bit
            active = [x for x in self.active if x != q]
            return DenseState(self.rho[tuple(idx)].copy(), active)
        out = np.zeros_like(self.rho)
        idx[a] = bit
        idx[m + a] = bit
        out[tuple(idx)] = self.rho[tuple(idx)]
        return DenseState(out, self.active)

    def _pauli_on(self, rho, p, side: str) -> np.ndarray:
        m = self.m
        for q in p.support():
            a = self.active.index(q)
            u = _1Q[p.letter(q)]
            if side == "left":
                rho = np.moveaxis(np.tensordot(u, rho, axes=([1], [a])), 0, a)
            else:
                # (rho P)_{.., j, ..} = sum_k rho_{.., k, ..} P_{k j}
                rho = np.moveaxis(np.tensordot(rho, u, axes=([m + a], [0])), -1, m + a)
        return rho * (1j ** p.phase)

    def _touch(self, p):
        for q in p.support():
            self.axis(q)

    def expectation(self, p) -> float:
        self._touch(p)
        d = 1 << self.m
        return float(np.trace(self._pauli_on(self.rho, p, "left").reshape(d, d)).real)

    def project_pauli(self, p, sign: int) -> "DenseState":
        """``Pi rho Pi`` with ``Pi = (1 + sign P) / 2``."""
        self._touch(p)
        left = self._pauli_on(self.rho, p, "left")
        right = self._pauli_on(self.rho, p, "right")
        both = self._pauli_on(left, p, "right")
        return DenseState((self.rho + sign * (left + right) + both) / 4, self.active)


def _next_use(ops):
    """For every ``M``/``MP`` op, whether its qubit is reset before reuse."""
    drop = {}
    for i, op in enumerate(ops):
        if op[0] != "M":
            continue
        q = op[1]
        verdict = False
        for later in ops[i + 1:]:
            kind = later[0]
            if kind == "R" and later[1] == q:
                verdict = True
                break
            if kind == "G" and q in later[2]:
                break
            if kind == "N" and later[2] == q:
                # noise on a qubit that is about to be reset is harmless only
                # after the reset, so keep it
                break
            if kind in ("M",) and later[1] == q:
                break
            if kind == "MP" and q in later[1].support():
                break
        drop[i] = verdict
    return drop


def _channels_for(circuit: CircuitSpec, kraus_noise_per_location):
    if kraus_noise_per_location is None:
        return [None] * circuit.A
    if isinstance(kraus_noise_per_location, KrausChannel):
        ops = kraus_noise_per_location.kraus_ops
        return [ops] * circuit.A
    if isinstance(kraus_noise_per_location, dict):
        out = [None] * circuit.A
        for a, ch in kraus_noise_per_location.items():
            out[a] = ch.kraus_ops if isinstance(ch, KrausChannel) else ch
        return out
    chans = list(kraus_noise_per_location)
    if len(chans) != circuit.A:
        raise OracleError("need one channel per noise location")
    return [None if c is None else (c.kraus_ops if isinstance(c, KrausChannel) else c) for c in chans]


def _is_identity(ops) -> bool:
    return len(ops) == 1 and np.allclose(ops[0], np.eye(2) * ops[0][0, 0]) and abs(abs(ops[0][0, 0]) - 1) < 1e-15


def evolve(circuit: CircuitSpec, kraus_noise_per_location=None, rho=None, prune: float = 0.0):
    """Evolve densely; returns a list of ``(bits dict, DenseState)`` branches."""
    if circuit.n > MAX_QUBITS:
        raise OracleError(f"dense oracle is capped at {MAX_QUBITS} qubits (circuit has {circuit.n})")
    if circuit.postprocess is not None:
        raise OracleError("circuits with a classical post-processing step are not supported densely")
    chans = _channels_for(circuit, kraus_noise_per_location)
    if rho is None:
        if len(circuit.rho_terms) != 1:
            raise OracleError("pass rho explicitly for multi-term initial states")
        state = DenseState.from_vector(circuit.initial_tableau().state_vector(), circuit.n)
    elif isinstance(rho, DenseState):
        state = rho.copy()
    else:
        r = np.asarray(rho, dtype=complex)
        if r.ndim == 1:
            state = DenseState.from_vector(r, circuit.n)
        else:
            state = DenseState(r.reshape((2,) * (2 * circuit.n)), list(range(circuit.n)))
    drop = _next_use(circuit.ops)
    branches = [({}, state)]
    for i, op in enumerate(circuit.ops):
        kind = op[0]
        if kind == "G":
            name = op[1].upper()
            if name in ("I", "ID"):
                continue
            u = _1Q.get(name)
            if u is None:
                u = _2Q[name]
            for _, s in branches:
                s.apply(u, op[2])
        elif kind == "N":
            ops = chans[op[1]]
            if ops is None or _is_identity(ops):
                continue
            for _, s in branches:
                s.kraus(ops, op[2])
        elif kind in ("M", "MP"):
            new = []
            for bits, s in branches:
                for bit in (0, 1):
                    if kind == "M":
                        b = s.project(op[1], bit, drop[i])
                    else:
                        b = s.project_pauli(op[1], 1 - 2 * bit)
                    if b.trace() > prune:
                        nb = dict(bits)
                        nb[op[2]] = bit
                        new.append((nb, b))
            branches = new
        elif kind == "R":
            q = op[1]
            for _, s in branches:
                if q not in s.active:
                    continue
                p0 = s.project(q, 0, True)
                s.rho = p0.rho + s.project(q, 1, True).rho
                s.active = p0.active
        elif kind == "F":
            for bits, s in branches:
                for name, qs in op[1](tuple(bits[k] for k in op[2])):
                    u = _1Q.get(name.upper())
                    s.apply(u if u is not None else _2Q[name.upper()], qs)
        elif kind == "D":
            forget = set(op[1])
            merged = {}
            for bits, s in branches:
                kept = {k: v for k, v in bits.items() if k not in forget}
                key = tuple(sorted(kept.items()))
                if key in merged:
                    other = merged[key][1]
                    # align active orders before adding
                    if other.active != s.active:
                        s = DenseState(np.ascontiguousarray(_reorder(s, other.active)), other.active)
                    other.rho = other.rho + s.rho
                else:
                    merged[key] = (kept, s)
            branches = list(merged.values())
    return branches


def _reorder(s: DenseState, order):
    m = s.m
    perm = [s.active.index(q) for q in order]
    return s.rho.transpose(perm + [m + p for p in perm])


def exact_expectation(circuit: CircuitSpec, kraus_noise_per_location=None, rho=None, obs=None) -> np.ndarray:
    """``Tr{O Cir(rho)}`` for each readout component (or for ``obs`` if given).

    ``obs`` may be a PauliString list or a dense matrix on all ``n`` qubits.
    """
    branches = evolve(circuit, kraus_noise_per_location, rho)
    if obs is not None and not isinstance(obs, (list, tuple)):
        total = 0.0
        o = np.asarray(obs)
        for _, s in branches:
            for q in range(circuit.n):
                s.axis(q)
            total += float(np.trace(o @ s.matrix(list(range(circuit.n)))).real)
        return np.array([total])
    paulis = list(obs) if obs is not None else list(circuit.observables)
    target = None
    if obs is None and circuit.target is not None:
        target = circuit._target.state_vector()
    out = None
    for bits, s in branches:
        p = s.trace()
        if p == 0.0:
            continue
        vals = [s.expectation(P) for P in paulis]
        if target is not None:
            for q in range(circuit.n):
                s.axis(q)
            rho = s.matrix(list(range(circuit.n)))
            vals.append(float(np.vdot(target, rho @ target).real))
        v = np.array(vals)
        if obs is None and circuit.finalize is not None:
            rec = np.zeros(circuit.n_keys, dtype=np.int8)
            for k, b in bits.items():
                rec[k] = b
            v = p * np.asarray(circuit.finalize(v / p, rec), dtype=float)
        out = v if out is None else out + v
    return out


def stabilizer_channel_kraus(index: int):
    return _dict.channel_kraus(_dict.dictionary()[index])


def _config_weights(gammas: np.ndarray, subsets):
    w = []
    for s in subsets:
        mask = np.zeros(len(gammas), dtype=bool)
        mask[list(s)] = True
        w.append(np.prod(gammas[mask]) * np.prod(1 - gammas[~mask]))
    w = np.array(w)
    return w / w.sum()


def exact_stratum_value(circuit: CircuitSpec, layout: NoiseLayout, k: int, cap: int = 10**7,
                        method: str = "auto", rng=None) -> np.ndarray:
    """Exact ``F_k``: enumerate every configuration with ``k`` faulty locations.

    Each configuration's ``f`` is computed with the tableau when the run uses
    no measurement randomness, otherwise with the dense engine (``auto``).
    ``method="dense"`` always uses the dense engine.
    """
    A = circuit.A
    if layout.A != A:
        raise OracleError("layout does not match the circuit")
    if not 0 <= k <= A:
        raise OracleError(f"k={k} outside 0..{A}")
    gammas = layout.gammas
    per_loc = [layout.decomps[c] for c in layout.channel_of]
    subsets = list(itertools.combinations(range(A), k))
    total_configs = 0
    for s in subsets:
        n_terms = 1
        for a in s:
            n_terms *= len(per_loc[a].fault_index)
        total_configs += n_terms
        if total_configs > cap:
            raise OracleError(f"enumeration exceeds cap {cap}")
    if k and np.all(gammas == gammas[0]):
        weights = np.full(len(subsets), 1.0 / comb(A, k))
    elif k:
        weights = _config_weights(gammas, subsets)
    else:
        weights = np.ones(1)
    rng = rng if rng is not None else np.random.default_rng(0)
    total = None
    for w_s, s in zip(weights, subsets):
        choices = [list(zip(per_loc[a].fault_index.tolist(), per_loc[a].fault_r.tolist())) for a in s]
        for combo in itertools.product(*choices):
            r = 1.0
            faults = {}
            for a, (idx, ri) in zip(s, combo):
                r *= ri
                faults[a] = idx
            f = _config_value(circuit, faults, method, rng)
            term = w_s * r * f
            total = term if total is None else total + term
    return total


class _Counting:
    def __init__(self, rng):
        self.rng = rng
        self.calls = 0

    def random(self):
        self.calls += 1
        return self.rng.random()


def _config_value(circuit, faults, method, rng):
    if method in ("auto", "tableau"):
        counter = _Counting(rng)
        t, record = execute(circuit, faults, counter)
        f = readout(circuit, t, record, counter)
        if counter.calls == 0 or method == "tableau":
            return f
    chans = {a: stabilizer_channel_kraus(i) for a, i in faults.items()}
    return exact_expectation(circuit, chans)
