"""Detector graphs and decoders: union-find (default) and exact matching.

A detector graph has one node per ``(layer, check)`` and a single boundary
node.  Each edge is an error mechanism flipping one or two detectors; it
stores the mechanism's residual on the data qubits and whether that residual
flips the logical readout.  Weights are uniform.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class DecoderError(ValueError):
    pass


@dataclass
class DetectorGraph:
    layers: int
    checks: int
    u: np.ndarray  # edge endpoints; the boundary node is ``n_nodes``
    v: np.ndarray
    residual: np.ndarray  # (edges, data qubits) bool
    flips_logical: np.ndarray  # (edges,) bool
    kind: str = "X"
    hyperedges: int = 0  # mechanisms flipping more than two detectors
    ambiguous: int = 0  # same detectors, different logical effect
    undetectable: int = 0  # no detectors, logical flip

    @property
    def n_nodes(self) -> int:
        return self.layers * self.checks

    @property
    def boundary(self) -> int:
        return self.n_nodes

    @property
    def n_edges(self) -> int:
        return len(self.u)

    @property
    def has_boundary(self) -> bool:
        return bool(np.any(self.v == self.boundary))

    @classmethod
    def from_mechanisms(cls, det, residual, flips_logical, layers: int, checks: int, kind: str = "X"):
        """Deduplicate single-fault mechanisms ``det[j]`` (``(layers, checks)`` bool)."""
        det = np.asarray(det, dtype=bool).reshape(len(det), -1)
        B = layers * checks
        seen = {}
        us, vs, res, flg = [], [], [], []
        hyper = amb = undet = 0
        for j in range(len(det)):
            nodes = np.flatnonzero(det[j])
            if len(nodes) == 0:
                undet += int(flips_logical[j])
                continue
            if len(nodes) > 2:
                hyper += 1
                continue
            key = (int(nodes[0]), int(nodes[1]) if len(nodes) == 2 else B)
            if key in seen:
                amb += int(flg[seen[key]] != bool(flips_logical[j]))
                continue
            seen[key] = len(us)
            us.append(key[0])
            vs.append(key[1])
            res.append(residual[j])
            flg.append(bool(flips_logical[j]))
        nd = residual.shape[1]
        return cls(layers, checks, np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                   np.array(res, dtype=bool).reshape(-1, nd), np.array(flg, dtype=bool), kind,
                   hyper, amb, undet)

    def __post_init__(self):
        self.adj = [[] for _ in range(self.n_nodes + 1)]
        self.index = {}
        for e, (a, b) in enumerate(zip(self.u.tolist(), self.v.tolist())):
            self.adj[a].append(e)
            self.adj[b].append(e)
            self.index[(min(a, b), max(a, b))] = e
        N = self.n_nodes + 1
        self.csr = csr_matrix((np.ones(2 * self.n_edges), (np.r_[self.u, self.v], np.r_[self.v, self.u])),
                              shape=(N, N))

    def other(self, e: int, node: int) -> int:
        a = int(self.u[e])
        return int(self.v[e]) if a == node else a

    def correction(self, edges) -> np.ndarray:
        edges = list(edges)
        if not edges:
            return np.zeros(self.residual.shape[1], dtype=bool)
        return np.bitwise_xor.reduce(self.residual[edges], axis=0)

    def logical_flip(self, edges) -> bool:
        return bool(self.flips_logical[list(edges)].sum() % 2) if len(edges) else False

    def to_dict(self) -> dict:
        return {"kind": self.kind, "layers": self.layers, "checks": self.checks,
                "edges": [[int(a), int(b), np.flatnonzero(r).tolist(), bool(f)]
                          for a, b, r, f in zip(self.u, self.v, self.residual, self.flips_logical)],
                "hyperedges": self.hyperedges, "ambiguous": self.ambiguous,
                "undetectable": self.undetectable}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _defects(graph: DetectorGraph, syndrome) -> list:
    syn = np.asarray(syndrome, dtype=bool).ravel()
    if syn.size != graph.n_nodes:
        raise DecoderError(f"syndrome has {syn.size} entries, graph has {graph.n_nodes} nodes")
    d = np.flatnonzero(syn).tolist()
    if len(d) % 2 and not graph.has_boundary:
        raise DecoderError("odd number of defects on a graph without boundary")
    return d


def union_find_edges(graph: DetectorGraph, syndrome) -> list:
    """Union-find growth with half edges, then peeling; returns edge indices."""
    defects = _defects(graph, syndrome)
    if not defects:
        return []
    B = graph.boundary
    parent = list(range(B + 1))
    size = [1] * (B + 1)
    parity = [0] * (B + 1)
    on_bnd = [False] * (B + 1)
    on_bnd[B] = True
    members = {}
    for v in defects:
        parity[v] = 1
        members[v] = [v]

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra == rb:
            return
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
        parity[ra] ^= parity[rb]
        on_bnd[ra] = on_bnd[ra] or on_bnd[rb]
        if ra != B:
            ma = members.pop(ra, [ra])
            ma.extend(members.pop(rb, [rb]))
            members[ra] = ma
        else:
            members.pop(rb, None)

    support = {}
    adj, u, v = graph.adj, graph.u, graph.v
    while True:
        odd = {r for r in (find(x) for x in defects) if parity[r] and not on_bnd[r]}
        if not odd:
            break
        full = []
        grew = False
        for r in odd:
            grow = set()
            for x in members[r]:
                grow.update(adj[x])
            for e in grow:
                s = support.get(e, 0)
                if s < 2:
                    grew = True
                    support[e] = s + 1
                    if s == 1:
                        full.append(e)
        if not grew:
            raise DecoderError("cluster cannot be neutralised")
        for e in full:
            union(int(u[e]), int(v[e]))
    return _peel(graph, defects, [e for e, s in support.items() if s == 2])


def _peel(graph: DetectorGraph, defects, edges) -> list:
    B = graph.boundary
    fadj = {}
    for e in edges:
        for x in (int(graph.u[e]), int(graph.v[e])):
            fadj.setdefault(x, []).append(e)
    seen = set()
    order, via = [], {}
    for root in [B] + list(defects):
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            x = queue.popleft()
            order.append(x)
            for e in fadj.get(x, ()):
                y = graph.other(e, x)
                if y not in seen:
                    seen.add(y)
                    via[y] = e
                    queue.append(y)
    live = set(defects)
    out = []
    for x in reversed(order):
        if x in via and x in live:
            e = via[x]
            out.append(e)
            live.discard(x)
            y = graph.other(e, x)
            if y != B:
                live.symmetric_difference_update({y})
    if live - {B}:
        raise DecoderError("peeling left unmatched defects")
    return out


MAX_MATCHING_DEFECTS = 24


def matching_edges(graph: DetectorGraph, syndrome) -> list:
    """Exact minimum-weight matching by exhaustive pairing (defects or boundary)."""
    defects = _defects(graph, syndrome)
    if not defects:
        return []
    m = len(defects)
    if m > MAX_MATCHING_DEFECTS:
        raise DecoderError(f"{m} defects exceed the exhaustive matching cap")
    B = graph.boundary
    dist, pred = shortest_path(graph.csr, unweighted=True, indices=defects, return_predecessors=True)
    dd = dist[:, defects]
    db = dist[:, B]

    @lru_cache(maxsize=None)
    def best(mask):
        if mask == 0:
            return 0.0, ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        c, pairs = best(rest)
        out = (c + db[i], pairs + ((i, -1),))
        j_mask = rest
        while j_mask:
            j = (j_mask & -j_mask).bit_length() - 1
            j_mask &= j_mask - 1
            c, pairs = best(rest & ~(1 << j))
            c += dd[i, j]
            if c < out[0]:
                out = (c, pairs + ((i, j),))
        return out

    cost, pairs = best((1 << m) - 1)
    if not np.isfinite(cost):
        raise DecoderError("defects cannot be matched")
    edges = []
    for i, j in pairs:
        target = B if j < 0 else defects[j]
        x = target
        while x != defects[i]:
            y = int(pred[i, x])
            edges.append(graph.index[(min(x, y), max(x, y))])
            x = y
    return edges


@dataclass
class DecodeResult:
    edges: list
    correction: np.ndarray
    logical_flip: bool


def decode(graph: DetectorGraph, syndrome, method: str = "uf") -> DecodeResult:
    edges = (union_find_edges if method == "uf" else matching_edges)(graph, syndrome)
    return DecodeResult(edges, graph.correction(edges), graph.logical_flip(edges))


def decoder_for(name: str):
    """``(graph, syndrome) -> correction mask`` for ``uf`` or ``mwpm``."""
    if name not in ("uf", "mwpm"):
        raise ValueError(f"unknown decoder {name!r}")
    fn = union_find_edges if name == "uf" else matching_edges

    def run(graph, syndrome):
        return graph.correction(fn(graph, syndrome))

    return run
