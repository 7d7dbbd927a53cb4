"""Stratum probabilities and fault-configuration sampling."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..circuit import FaultConfiguration, NoiseLayout


class SamplingError(ValueError):
    pass


def poisson_binomial(gammas) -> np.ndarray:
    """Exact law of the number of faulty locations, ``P(k)`` for ``k = 0..A``."""
    g = np.asarray(gammas, dtype=float).ravel()
    if g.size == 0:
        raise SamplingError("poisson_binomial needs at least one location")
    if np.any(g < 0) or np.any(g > 1):
        raise SamplingError("noise strengths must lie in [0, 1]")
    p = np.zeros(g.size + 1)
    p[0] = 1.0
    for a, ga in enumerate(g):
        # convolve with Bernoulli(ga); only entries 0..a+1 can be nonzero
        p[1:a + 2] = p[1:a + 2] * (1 - ga) + p[:a + 1] * ga
        p[0] *= 1 - ga
    return p


def binomial_pmf(A: int, gamma: float) -> np.ndarray:
    from scipy.stats import binom
    return binom.pmf(np.arange(A + 1), A, gamma)


# ----------------------------------------------------------------------
# locations


def _suffix_logprob(g: np.ndarray, k: int) -> np.ndarray:
    """``L[j, m] = log P(exactly m faults among locations j..A-1)`` for m <= k."""
    A = g.size
    with np.errstate(divide="ignore"):
        lg, l1g = np.log(g), np.log1p(-g)
    L = np.full((A + 1, k + 1), -np.inf)
    L[A, 0] = 0.0
    for j in range(A - 1, -1, -1):
        L[j, 0] = L[j + 1, 0] + l1g[j]
        if k:
            L[j, 1:] = np.logaddexp(L[j + 1, 1:] + l1g[j], L[j + 1, :-1] + lg[j])
    return L


@lru_cache(maxsize=64)
def _suffix_cached(key: bytes, k: int):
    return _suffix_logprob(np.frombuffer(key, dtype=float), k)


def _conditional_bernoulli(k: int, g: np.ndarray, rng) -> np.ndarray:
    """Exact draw from the law of the fault set given exactly ``k`` faults."""
    L = _suffix_cached(g.tobytes(), k)
    if not np.isfinite(L[0, k]):
        raise SamplingError(f"stratum k={k} has zero probability")
    with np.errstate(divide="ignore"):
        lg = np.log(g)
    out = []
    need = k
    u = rng.random(g.size)
    for j in range(g.size):
        if need == 0:
            break
        p_in = np.exp(lg[j] + L[j + 1, need - 1] - L[j, need])
        if u[j] < p_in:
            out.append(j)
            need -= 1
    return np.array(out, dtype=np.int64)


def efraimidis_spirakis(k: int, weights, rng) -> np.ndarray:
    """Weighted sampling without replacement by keys ``u^(1/w)``.

    Draws follow the successive-sampling law (pick proportional to weight,
    remove, repeat).
    """
    w = np.asarray(weights, dtype=float)
    if k > w.size:
        raise SamplingError(f"k={k} exceeds {w.size} locations")
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    u = rng.random(w.size)
    with np.errstate(divide="ignore"):
        keys = np.where(w > 0, np.log(u) / np.where(w > 0, w, 1.0), -np.inf)
    top = np.argpartition(-keys, k - 1)[:k]
    return np.sort(top).astype(np.int64)


def sample_fault_locations(k: int, gammas, rng, method: str = "auto") -> np.ndarray:
    """``k`` distinct sorted location indices.

    Homogeneous strengths give a uniform subset.  Otherwise ``method="exact"``
    (default) draws from the conditional law of independent Bernoulli faults,
    and ``method="es"`` uses Efraimidis-Spirakis with weights ``gamma``.
    """
    g = np.asarray(gammas, dtype=float)
    A = g.size
    if not 0 <= k <= A:
        raise SamplingError(f"k={k} outside 0..{A}")
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    if k == A:
        return np.arange(A, dtype=np.int64)
    homogeneous = bool(np.all(g == g[0]))
    if method == "es":
        return efraimidis_spirakis(k, g, rng)
    if homogeneous or method == "uniform":
        return np.sort(rng.permutation(A)[:k]).astype(np.int64)
    return _conditional_bernoulli(k, g, rng)


def inclusion_probabilities(k: int, gammas) -> np.ndarray:
    """Exact ``P(a in faulty set | k faults)`` by subset enumeration (small A)."""
    from itertools import combinations
    g = np.asarray(gammas, dtype=float)
    A = g.size
    incl = np.zeros(A)
    total = 0.0
    for s in combinations(range(A), k):
        mask = np.zeros(A, dtype=bool)
        mask[list(s)] = True
        w = np.prod(g[mask]) * np.prod(1 - g[~mask])
        incl[mask] += w
        total += w
    return incl / total


def es_inclusion_probabilities(k: int, weights) -> np.ndarray:
    """Exact inclusion law of successive weighted sampling, by enumerating orders."""
    from itertools import permutations
    w = np.asarray(weights, dtype=float)
    A = w.size
    incl = np.zeros(A)
    for order in permutations(range(A), k):
        p, left = 1.0, w.sum()
        for a in order:
            p *= w[a] / left
            left -= w[a]
        incl[list(order)] += p
    return incl


# ----------------------------------------------------------------------
# fault types


def _tables(layout: NoiseLayout):
    cache = getattr(layout, "_sampling_tables", None)
    if cache is None:
        cache = []
        for d in layout.decomps:
            r = np.asarray(d.fault_r, dtype=float)
            if r.size == 0:
                cache.append(None)
                continue
            p = np.abs(r) / np.abs(r).sum()
            cache.append((np.cumsum(p), np.asarray(d.fault_index, dtype=np.int64), np.sign(r).astype(np.int8)))
        layout._sampling_tables = cache
    return cache


def sample_fault_types(locations, layout: NoiseLayout, rng) -> FaultConfiguration:
    """Draw each faulty location's dictionary term with probability ``|r|/beta``."""
    locs = np.asarray(locations, dtype=np.int64)
    tables = _tables(layout)
    choices = np.empty(locs.size, dtype=np.int64)
    sign = 1
    u = rng.random(locs.size)
    for j, a in enumerate(locs):
        tab = tables[layout.channel_of[a]]
        if tab is None:
            raise SamplingError(f"location {a} has no fault terms (gamma = 0)")
        cum, idx, sg = tab
        i = min(int(np.searchsorted(cum, u[j] * cum[-1], side="right")), len(cum) - 1)
        choices[j] = idx[i]
        sign *= int(sg[i])
    return FaultConfiguration(locs, choices, sign)


def sample_configuration(k: int, layout: NoiseLayout, rng, method: str = "auto") -> FaultConfiguration:
    locs = sample_fault_locations(k, layout.gammas, rng, method)
    return sample_fault_types(locs, layout, rng)


def config_signs(layout: NoiseLayout, locations: np.ndarray, choices: np.ndarray) -> np.ndarray:
    """Sign of ``prod r`` for a batch of configurations ``(M, k)`` under ``layout``.

    Returns 0 where a choice is outside the layout's fault support.
    """
    M = locations.shape[0]
    out = np.ones(M, dtype=np.int8)
    for c, d in enumerate(layout.decomps):
        lut = np.zeros(64, dtype=np.int8)
        lut[np.asarray(d.fault_index, dtype=np.int64)] = np.sign(d.fault_r).astype(np.int8)
        mask = layout.channel_of[locations] == c
        vals = np.where(mask, lut[choices], 1)
        out *= np.prod(vals, axis=1).astype(np.int8) if vals.size else 1
    return out
