"""Bit-packed Pauli strings.

A ``PauliString`` stores its X and Z supports as Python ints (bit ``q`` is
qubit ``q``) and a phase exponent of ``i``.  The public phase is relative to
the letter form ``i^phase * P_0 (x) P_1 (x) ...`` with ``P in {I, X, Y, Z}``,
so Hermitian operators have an even phase.

Internally the tableau uses the ordered form ``i^r X^x Z^z``; the two are
related by ``r = phase + |x & z| (mod 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass

_LETTERS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}


@dataclass(frozen=True)
class PauliString:
    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("PauliString needs at least one qubit")
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask:
            raise ValueError("support exceeds qubit count")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def from_str(cls, s: str) -> "PauliString":
        """Parse ``"+XIZ"``, ``"-iYY"`` or ``"XZ"`` (qubit 0 leftmost)."""
        phase = 0
        body = s.strip()
        if body.startswith("+"):
            body = body[1:]
        elif body.startswith("-"):
            phase = 2
            body = body[1:]
        if body.startswith("i"):
            phase += 1
            body = body[1:]
        x = z = 0
        for q, ch in enumerate(body):
            try:
                bx, bz = _LETTERS[ch]
            except KeyError:
                raise ValueError(f"bad Pauli letter {ch!r}") from None
            x |= bx << q
            z |= bz << q
        return cls(len(body), x, z, phase)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str, sign: int = 1) -> "PauliString":
        if not 0 <= qubit < n:
            raise ValueError(f"qubit {qubit} out of range for n={n}")
        bx, bz = _LETTERS[letter]
        return cls(n, bx << qubit, bz << qubit, 0 if sign > 0 else 2)

    @classmethod
    def from_sparse(cls, n: int, letters: dict, sign: int = 1) -> "PauliString":
        """Build from ``{qubit: letter}``."""
        x = z = 0
        for q, ch in letters.items():
            bx, bz = _LETTERS[ch]
            x |= bx << q
            z |= bz << q
        return cls(n, x, z, 0 if sign > 0 else 2)

    def __str__(self):
        prefix = {0: "+", 1: "+i", 2: "-", 3: "-i"}[self.phase]
        chars = []
        for q in range(self.n):
            chars.append("IXZY"[((self.x >> q) & 1) | (((self.z >> q) & 1) << 1)])
        return prefix + "".join(chars)

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def sign(self) -> int:
        if not self.is_hermitian:
            raise ValueError("sign is only defined for Hermitian Paulis")
        return 1 if self.phase == 0 else -1

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def letter(self, q: int) -> str:
        return "IXZY"[((self.x >> q) & 1) | (((self.z >> q) & 1) << 1)]

    def support(self) -> list[int]:
        s = self.x | self.z
        return [q for q in range(self.n) if (s >> q) & 1]

    def xz_phase(self) -> int:
        """Phase exponent in the ordered ``X^x Z^z`` form."""
        return (self.phase + (self.x & self.z).bit_count()) % 4

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("qubit count mismatch")
        r = self.xz_phase() + other.xz_phase() + 2 * (self.z & other.x).bit_count()
        x = self.x ^ other.x
        z = self.z ^ other.z
        return PauliString(self.n, x, z, (r - (x & z).bit_count()) % 4)

    def __neg__(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, self.phase + 2)

    def commutes(self, other: "PauliString") -> bool:
        return ((self.x & other.z).bit_count() + (self.z & other.x).bit_count()) % 2 == 0

    def unsigned(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, 0)

    def to_matrix(self):
        """Dense matrix; qubit 0 is the most significant tensor factor."""
        import numpy as np

        mats = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.array([[1.0 + 0j]])
        for q in range(self.n):
            out = np.kron(out, mats[self.letter(q)])
        return (1j ** self.phase) * out
