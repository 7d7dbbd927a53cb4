"""Append-only sample pools.

File layout: the magic line, a little-endian ``uint32`` header length, a JSON
header (circuit hash, layout hash, ``k``, reference gammas, seed, readout
size), then fixed-width records ``(locations, fault indices, sign, f)``.
Records are only ever appended, so a pool written for ``M`` samples is a
prefix of the same pool extended to ``M' > M``.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..circuit import FaultConfiguration, SamplePoint

MAGIC = b"STRATPOOL1\n"
VERSION = 1


class PoolError(ValueError):
    pass


def record_dtype(k: int, d: int) -> np.dtype:
    return np.dtype([("loc", "<i4", (k,)), ("choice", "<i2", (k,)), ("sign", "i1"), ("f", "<f8", (d,))])


@dataclass
class SamplePool:
    header: dict
    locations: np.ndarray
    choices: np.ndarray
    sign: np.ndarray
    f: np.ndarray
    path: Path | None = None
    _saved: int = field(default=0, repr=False)

    @classmethod
    def empty(cls, circuit_hash: str, layout_hash: str, k: int, gamma_ref, seed: int, d: int, **extra) -> "SamplePool":
        header = {"version": VERSION, "circuit": circuit_hash, "layout": layout_hash, "k": int(k),
                  "gamma_ref": [float(g) for g in np.atleast_1d(gamma_ref)], "seed": int(seed), "d": int(d)}
        header.update(extra)
        return cls(header, np.zeros((0, k), np.int64), np.zeros((0, k), np.int64),
                   np.zeros(0, np.int8), np.zeros((0, d)))

    @property
    def k(self) -> int:
        return int(self.header["k"])

    @property
    def d(self) -> int:
        return int(self.header["d"])

    @property
    def seed(self) -> int:
        return int(self.header["seed"])

    def __len__(self) -> int:
        return len(self.sign)

    def extend(self, locations, choices, sign, f):
        self.locations = np.vstack([self.locations, np.asarray(locations, np.int64).reshape(-1, self.k)])
        self.choices = np.vstack([self.choices, np.asarray(choices, np.int64).reshape(-1, self.k)])
        self.sign = np.concatenate([self.sign, np.asarray(sign, np.int8)])
        self.f = np.vstack([self.f, np.asarray(f, float).reshape(-1, self.d)])

    def head(self, M: int) -> "SamplePool":
        return SamplePool(self.header, self.locations[:M], self.choices[:M], self.sign[:M], self.f[:M])

    def points(self) -> list:
        return [SamplePoint(FaultConfiguration(l, c, int(s)), f)
                for l, c, s, f in zip(self.locations, self.choices, self.sign, self.f)]

    def records(self, start: int = 0) -> np.ndarray:
        rec = np.zeros(len(self) - start, dtype=record_dtype(self.k, self.d))
        rec["loc"] = self.locations[start:]
        rec["choice"] = self.choices[start:]
        rec["sign"] = self.sign[start:]
        rec["f"] = self.f[start:]
        return rec

    # -- persistence
    def save(self, path):
        """Write (or append the unsaved tail of) this pool to ``path``."""
        path = Path(path)
        if path.exists() and self.path == path:
            with open(path, "ab") as fh:
                fh.write(self.records(self._saved).tobytes())
        else:
            blob = json.dumps(self.header, sort_keys=True).encode()
            tmp = path.with_suffix(path.suffix + ".tmp")
            with open(tmp, "wb") as fh:
                fh.write(MAGIC + struct.pack("<I", len(blob)) + blob)
                fh.write(self.records().tobytes())
            os.replace(tmp, path)
            self.path = path
        self._saved = len(self)

    @classmethod
    def load(cls, path) -> "SamplePool":
        path = Path(path)
        raw = path.read_bytes()
        if not raw.startswith(MAGIC):
            raise PoolError(f"{path} is not a sample pool")
        pos = len(MAGIC)
        (n,) = struct.unpack("<I", raw[pos:pos + 4])
        header = json.loads(raw[pos + 4:pos + 4 + n])
        body = raw[pos + 4 + n:]
        dt = record_dtype(header["k"], header["d"])
        usable = len(body) - len(body) % dt.itemsize  # a torn final record is ignored
        rec = np.frombuffer(body[:usable], dtype=dt)
        pool = cls(header, rec["loc"].astype(np.int64).reshape(-1, header["k"]),
                   rec["choice"].astype(np.int64).reshape(-1, header["k"]),
                   rec["sign"].astype(np.int8), rec["f"].reshape(-1, header["d"]).copy(), path)
        pool._saved = len(pool)
        return pool

    @staticmethod
    def read_header(path) -> dict:
        with open(path, "rb") as fh:
            if fh.read(len(MAGIC)) != MAGIC:
                raise PoolError(f"{path} is not a sample pool")
            (n,) = struct.unpack("<I", fh.read(4))
            return json.loads(fh.read(n))


def pool_filename(circuit_hash: str, layout_hash: str, k: int, seed: int) -> str:
    return f"{circuit_hash}-{layout_hash}-k{k}-s{seed}.pool"


def list_pools(directory) -> list:
    """``(path, header, record count)`` for every pool file in ``directory``."""
    out = []
    for p in sorted(Path(directory).glob("*.pool")):
        h = SamplePool.read_header(p)
        size = p.stat().st_size - len(MAGIC) - 4 - len(json.dumps(h, sort_keys=True).encode())
        out.append((p, h, size // record_dtype(h["k"], h["d"]).itemsize))
    return out
