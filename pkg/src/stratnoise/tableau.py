"""Stabilizer tableau simulator.

The tableau is stored column-major: for every qubit ``q`` the ints
``xs[q]`` and ``zs[q]`` hold one bit per generator row.  Rows ``0..n-1`` are
destabilizers, rows ``n..2n-1`` stabilizers.  Each row is the operator
``i^r X^x Z^z`` with ``r`` kept mod 4 in two bit-sliced ints ``r_lo`` and
``r_hi``.  In this ordered form CNOT needs no phase update and a row product
picks up ``2 * |z_1 & x_2|``, so Clifford gates cost a handful of big-int
operations regardless of ``n``.
"""

from __future__ import annotations

from .pauli import PauliString


class TableauError(ValueError):
    pass


def _bits(v: int):
    while v:
        low = v & -v
        yield low.bit_length() - 1
        v ^= low


class Tableau:
    __slots__ = ("n", "xs", "zs", "r_lo", "r_hi", "_stab", "_destab", "_width")

    def __init__(self, n: int):
        if n < 1:
            raise TableauError("a tableau needs at least one qubit")
        self.n = n
        self.xs = [1 << q for q in range(n)]
        self.zs = [1 << (n + q) for q in range(n)]
        self.r_lo = 0
        self.r_hi = 0
        self._destab = (1 << n) - 1
        self._stab = self._destab << n
        self._width = 2 * n

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n = self.n
        t.xs = self.xs.copy()
        t.zs = self.zs.copy()
        t.r_lo = self.r_lo
        t.r_hi = self.r_hi
        t._stab = self._stab
        t._destab = self._destab
        t._width = self._width
        return t

    # ------------------------------------------------------------------
    # Clifford gates

    def _check(self, *qubits):
        for q in qubits:
            if not 0 <= q < self.n:
                raise TableauError(f"qubit {q} out of range for n={self.n}")
        if len(set(qubits)) != len(qubits):
            raise TableauError(f"repeated target in {qubits}")

    def h(self, q: int):
        x = self.xs[q]
        z = self.zs[q]
        self.r_hi ^= x & z
        self.xs[q] = z
        self.zs[q] = x

    def s(self, q: int):
        x = self.xs[q]
        self.r_hi ^= self.r_lo & x
        self.r_lo ^= x
        self.zs[q] ^= x

    def sdg(self, q: int):
        x = self.xs[q]
        self.r_hi ^= x & ~self.r_lo
        self.r_lo ^= x
        self.zs[q] ^= x

    def x(self, q: int):
        self.r_hi ^= self.zs[q]

    def z(self, q: int):
        self.r_hi ^= self.xs[q]

    def y(self, q: int):
        self.r_hi ^= self.xs[q] ^ self.zs[q]

    def cx(self, c: int, t: int):
        self.xs[t] ^= self.xs[c]
        self.zs[c] ^= self.zs[t]

    def cz(self, a: int, b: int):
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def swap(self, a: int, b: int):
        self.xs[a], self.xs[b] = self.xs[b], self.xs[a]
        self.zs[a], self.zs[b] = self.zs[b], self.zs[a]

    _GATES = {
        "H": h, "S": s, "SDG": sdg, "X": x, "Y": y, "Z": z,
        "CX": cx, "CNOT": cx, "CZ": cz, "SWAP": swap,
    }

    def gate(self, name: str, *qubits: int):
        if name in ("I", "ID"):
            self._check(*qubits)
            return
        try:
            fn = Tableau._GATES[name]
        except KeyError:
            raise TableauError(f"unknown gate {name!r}") from None
        self._check(*qubits)
        fn(self, *qubits)

    def apply_pauli(self, p: PauliString):
        """Conjugate by a Pauli operator (flips signs of anticommuting rows)."""
        self.r_hi ^= self._anti_mask(p.x, p.z)

    # ------------------------------------------------------------------
    # rows

    def _anti_mask(self, px: int, pz: int) -> int:
        acc = 0
        xs = self.xs
        zs = self.zs
        for q in _bits(pz):
            acc ^= xs[q]
        for q in _bits(px):
            acc ^= zs[q]
        return acc

    def _row(self, i: int) -> tuple[int, int, int]:
        x = z = 0
        for q in range(self.n):
            x |= ((self.xs[q] >> i) & 1) << q
            z |= ((self.zs[q] >> i) & 1) << q
        r = ((self.r_lo >> i) & 1) | (((self.r_hi >> i) & 1) << 1)
        return x, z, r

    def _set_row(self, i: int, x: int, z: int, r: int):
        bit = 1 << i
        keep = ~bit
        xs = self.xs
        zs = self.zs
        for q in range(self.n):
            xq = xs[q] & keep
            zq = zs[q] & keep
            if (x >> q) & 1:
                xq |= bit
            if (z >> q) & 1:
                zq |= bit
            xs[q] = xq
            zs[q] = zq
        self.r_lo = (self.r_lo & keep) | (bit if r & 1 else 0)
        self.r_hi = (self.r_hi & keep) | (bit if r & 2 else 0)

    def row(self, i: int) -> PauliString:
        x, z, r = self._row(i)
        return PauliString(self.n, x, z, (r - (x & z).bit_count()) % 4)

    def stabilizers(self) -> list[PauliString]:
        return [self.row(self.n + i) for i in range(self.n)]

    def destabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n)]

    # ------------------------------------------------------------------
    # measurement

    def _product_phase(self, rows: int) -> int:
        """Phase exponent of the ordered product of the given rows."""
        total = (self.r_lo & rows).bit_count() + 2 * (self.r_hi & rows).bit_count()
        width = self._width
        pairs = 0
        xs = self.xs
        for q, zcol in enumerate(self.zs):
            zq = zcol & rows
            if not zq:
                continue
            xq = xs[q] & rows
            if not xq:
                continue
            v = zq << 1
            shift = 1
            while shift < width:
                v ^= v << shift
                shift <<= 1
            pairs += (v & xq).bit_count()
        return (total + 2 * pairs) % 4

    def _deterministic_sign(self, px: int, pz: int, rp: int, anti: int) -> int:
        rows = (anti & self._destab) << self.n
        r = (self._product_phase(rows) - rp) % 4
        if r == 0:
            return 1
        if r == 2:
            return -1
        raise TableauError("operator is not Hermitian")  # pragma: no cover

    def expectation(self, p: PauliString) -> int:
        """<P> for Hermitian ``p``: +1, -1, or 0 when the outcome is random."""
        if p.n != self.n:
            raise TableauError("qubit count mismatch")
        if not p.is_hermitian:
            raise TableauError("expectation needs a Hermitian Pauli")
        anti = self._anti_mask(p.x, p.z)
        if anti & self._stab:
            return 0
        return self._deterministic_sign(p.x, p.z, p.xz_phase(), anti)

    def measure(self, p: PauliString, rng=None, forced: int | None = None) -> tuple[int, bool]:
        """Measure Hermitian ``p``; returns ``(outcome, was_random)``.

        A random outcome is drawn from ``rng`` unless ``forced`` (+1/-1) is
        given, in which case the state is projected onto that eigenspace.
        Deterministic outcomes never touch ``rng``.
        """
        if p.n != self.n:
            raise TableauError("qubit count mismatch")
        if not p.is_hermitian:
            raise TableauError("cannot measure a non-Hermitian Pauli")
        px, pz, rp = p.x, p.z, p.xz_phase()
        anti = self._anti_mask(px, pz)
        stab_anti = anti & self._stab
        if not stab_anti:
            return self._deterministic_sign(px, pz, rp, anti), False

        if forced is None:
            outcome = 1 if rng.random() < 0.5 else -1
        else:
            outcome = forced
        self._collapse(px, pz, rp, anti, stab_anti, outcome)
        return outcome, True

    def _collapse(self, px, pz, rp, anti, stab_anti, outcome):
        n = self.n
        p = (stab_anti & -stab_anti).bit_length() - 1
        others = anti & ~(1 << p) & ~(1 << (p - n))
        xr, zr, rr = self._row(p)
        if others:
            xs = self.xs
            zs = self.zs
            par = 0
            for q in _bits(xr):
                par ^= zs[q]
            par &= others
            if rr & 1:
                carry = self.r_lo & others
                self.r_lo ^= others
                self.r_hi ^= carry
            if rr & 2:
                self.r_hi ^= others
            self.r_hi ^= par
            for q in _bits(xr):
                xs[q] ^= others
            for q in _bits(zr):
                zs[q] ^= others
        self._set_row(p - n, xr, zr, rr)
        self._set_row(p, px, pz, (rp + (0 if outcome > 0 else 2)) % 4)

    def measure_z(self, q: int, rng) -> int:
        """Computational-basis measurement of qubit ``q`` (+1 for |0>)."""
        xq = self.xs[q]
        if not xq & self._stab:
            return self._deterministic_sign(0, 1 << q, 0, xq)
        outcome = 1 if rng.random() < 0.5 else -1
        self._collapse(0, 1 << q, 0, xq, xq & self._stab, outcome)
        return outcome

    def reset_z(self, q: int, rng):
        if self.measure_z(q, rng) < 0:
            self.x(q)

    def reset(self, p: PauliString, sign: int, rng) -> "Tableau":
        """Measure single-qubit ``p`` and flip onto the ``sign`` eigenstate."""
        if p.weight != 1:
            raise TableauError("reset needs a single-qubit Pauli")
        outcome, _ = self.measure(p, rng)
        if outcome != sign:
            q = p.support()[0]
            # X flips Z and Y eigenstates; Z flips X eigenstates
            if p.letter(q) == "X":
                self.z(q)
            else:
                self.x(q)
        return self

    # ------------------------------------------------------------------
    # construction and comparison

    @classmethod
    def from_stabilizers(cls, generators: list[PauliString]) -> "Tableau":
        """Tableau of the state stabilized by ``n`` independent commuting generators."""
        if not generators:
            raise TableauError("no generators given")
        n = generators[0].n
        if len(generators) != n:
            raise TableauError(f"need exactly {n} generators, got {len(generators)}")
        for g in generators:
            if g.n != n or not g.is_hermitian:
                raise TableauError("generators must be Hermitian and of equal size")
        for i, a in enumerate(generators):
            for b in generators[i + 1:]:
                if not a.commutes(b):
                    raise TableauError(f"generators {a} and {b} anticommute")
        t = cls(n)
        for g in generators:
            t.measure(g, forced=1)
        wrong = [k for k, g in enumerate(generators) if t.expectation(g) != 1]
        if any(t.expectation(g) == 0 for g in generators):
            raise TableauError("generators are not independent")
        if wrong:
            flips = _dual_paulis(generators)
            for k in wrong:
                t.apply_pauli(flips[k])
        return t

    def overlap(self, target: "Tableau") -> float:
        """|<target|self>|^2 via projection onto the target's generators."""
        if target.n != self.n:
            raise TableauError("qubit count mismatch")
        work = self.copy()
        halvings = 0
        for g in target.stabilizers():
            outcome, random = work.measure(g, forced=1)
            if random:
                halvings += 1
            elif outcome != 1:
                return 0.0
        return 2.0 ** (-halvings)

    def check_invariants(self):
        """Raise if the symplectic structure of the rows is broken."""
        n = self.n
        rows = [self._row(i) for i in range(2 * n)]

        def anti(a, b):
            return ((a[0] & b[1]).bit_count() + (a[1] & b[0]).bit_count()) & 1

        for i in range(n):
            for j in range(n):
                if anti(rows[n + i], rows[n + j]):
                    raise TableauError(f"stabilizers {i},{j} anticommute")
                if anti(rows[i], rows[n + j]) != (i == j):
                    raise TableauError(f"destabilizer {i} vs stabilizer {j} broken")
                if i != j and anti(rows[i], rows[j]):
                    raise TableauError(f"destabilizers {i},{j} anticommute")
            for r in (rows[i], rows[n + i]):
                if (r[2] - (r[0] & r[1]).bit_count()) % 2:
                    raise TableauError("non-Hermitian row")

    def state_vector(self):
        """Dense state vector (qubit 0 most significant); small ``n`` only."""
        import numpy as np

        if self.n > 14:
            raise TableauError("state_vector is limited to 14 qubits")
        dim = 1 << self.n
        proj = np.eye(dim, dtype=complex)
        for g in self.stabilizers():
            proj = proj @ (np.eye(dim) + g.to_matrix()) / 2
        col = int(np.argmax(np.linalg.norm(proj, axis=0)))
        v = proj[:, col]
        return v / np.linalg.norm(v)

    def __repr__(self):
        return f"Tableau(n={self.n}, stabilizers={[str(s) for s in self.stabilizers()]})"


def _dual_paulis(generators: list[PauliString]) -> list[PauliString]:
    """Paulis ``D_k`` anticommuting with generator ``k`` only."""
    n = generators[0].n
    # <P, g> = |x_P & z_g| + |z_P & x_g|; solve with the swapped vector of g
    rows = [(g.z | (g.x << n), 1 << k) for k, g in enumerate(generators)]
    width = 2 * n
    pivots = []
    r = 0
    for col in range(width):
        piv = next((i for i in range(r, len(rows)) if (rows[i][0] >> col) & 1), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and (rows[i][0] >> col) & 1:
                rows[i] = (rows[i][0] ^ rows[r][0], rows[i][1] ^ rows[r][1])
        pivots.append(col)
        r += 1
    if r != len(generators):
        raise TableauError("generators are not independent")
    out = []
    for k in range(len(generators)):
        vec = 0
        for i, col in enumerate(pivots):
            if (rows[i][1] >> k) & 1:
                vec |= 1 << col
        mask = (1 << n) - 1
        out.append(PauliString(n, vec & mask, vec >> n, 0))
    return out


def new_tableau(n: int) -> Tableau:
    return Tableau(n)


class CliffordOp:
    """An ideal Clifford operation: a gate name plus target qubits.

    ``kind`` is one of H, S, SDG, CX, CZ, SWAP, X, Y, Z, I, or the name of
    one of the 24 single-qubit Cliffords (see ``dictionary.clifford_names``).
    """

    __slots__ = ("kind", "targets")

    def __init__(self, kind: str, *targets: int):
        self.kind = kind.upper() if kind.upper() in Tableau._GATES or kind.upper() in ("I", "ID") else kind
        self.targets = tuple(targets)
        if len(set(self.targets)) != len(self.targets):
            raise TableauError(f"repeated target in {self.targets}")

    def __repr__(self):
        return f"CliffordOp({self.kind!r}, {', '.join(map(str, self.targets))})"


def apply_clifford(t: Tableau, op: CliffordOp) -> Tableau:
    if op.kind in Tableau._GATES or op.kind in ("I", "ID"):
        t.gate(op.kind, *op.targets)
        return t
    from .dictionary import clifford_names, clifford_words

    names = clifford_names()
    if op.kind not in names:
        raise TableauError(f"unknown Clifford {op.kind!r}")
    if len(op.targets) != 1:
        raise TableauError("composite Cliffords act on one qubit")
    t._check(*op.targets)
    index = names.index(op.kind)
    word = clifford_words()[index] if index >= 4 else (op.kind,) if index else ()
    for g in word:
        t.gate(g, op.targets[0])
    return t


def measure_pauli(t: Tableau, p: PauliString, rng) -> int:
    return t.measure(p, rng)[0]


def reset_to_eigenstate(t: Tableau, p: PauliString, sign: int, rng) -> Tableau:
    return t.reset(p, sign, rng)


def stabilizer_overlap(t: Tableau, target: Tableau) -> float:
    return t.overlap(target)
