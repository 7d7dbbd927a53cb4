"""Rejection re-sampling of a reference pool for a nearby target layout."""

from __future__ import annotations

import numpy as np

from ..circuit import NoiseLayout
from .strata import SamplingError, config_signs, poisson_binomial


class UnboundedRatio(SamplingError):
    """The target puts weight where the reference has none."""


def _type_probs(decomp) -> np.ndarray:
    p = np.zeros(64)
    r = np.asarray(decomp.fault_r, dtype=float)
    p[np.asarray(decomp.fault_index, dtype=np.int64)] = np.abs(r) / np.abs(r).sum()
    return p


def ratio_tables(ref: NoiseLayout, target: NoiseLayout):
    """Per-location odds ratios, per-channel type-ratio tables and bounds.

    Returns ``(odds, tables, bounds)`` with ``tables[a]`` the ratio
    ``p_target(i) / p_ref(i)`` for location ``a``'s channels and
    ``bounds[a] = odds[a] * max_i tables[a][i]``.
    """
    if ref.A != target.A:
        raise SamplingError("reference and target layouts differ in size")
    g_r, g_t = ref.gammas, target.gammas
    if np.any((g_r == 0) & (g_t > 0)):
        raise UnboundedRatio("target is noisy where the reference is noiseless")
    with np.errstate(divide="ignore", invalid="ignore"):
        odds = np.where(g_t > 0, (g_t / (1 - g_t)) / (g_r / (1 - g_r)), 0.0)
    if np.any(~np.isfinite(odds)):
        raise UnboundedRatio("noise strength 1 cannot be re-sampled")
    pair_ratio = {}
    A = ref.A
    tables = np.zeros((A, 64))
    bounds = np.zeros(A)
    for a in range(A):
        key = (int(ref.channel_of[a]), int(target.channel_of[a]))
        if key not in pair_ratio:
            dr, dt = ref.decomps[key[0]], target.decomps[key[1]]
            if dt.gamma == 0:
                pair_ratio[key] = np.zeros(64)
            else:
                pr, pt = _type_probs(dr), _type_probs(dt)
                if np.any((pr == 0) & (pt > 0)):
                    raise UnboundedRatio("target fault support exceeds the reference support")
                with np.errstate(divide="ignore", invalid="ignore"):
                    pair_ratio[key] = np.where(pr > 0, pt / np.where(pr > 0, pr, 1), 0.0)
        tables[a] = pair_ratio[key]
        bounds[a] = odds[a] * tables[a].max()
    return odds, tables, bounds


def acceptance_probabilities(locations, choices, ref: NoiseLayout, target: NoiseLayout) -> np.ndarray:
    """``P(i) / (c P_ref(i))`` for every record of a stratum (arrays ``(M, k)``)."""
    locations = np.asarray(locations, dtype=np.int64)
    choices = np.asarray(choices, dtype=np.int64)
    odds, tables, bounds = ratio_tables(ref, target)
    k = locations.shape[1]
    if k == 0:
        return np.ones(locations.shape[0])
    top = np.sort(bounds)[::-1][:k]
    if np.any(top == 0):
        return np.zeros(locations.shape[0])
    # work in logs: k may be large
    with np.errstate(divide="ignore"):
        log_c = np.log(top).sum()
        per = np.log(odds[locations]) + np.log(tables[locations, choices])
    return np.exp(np.minimum(per.sum(axis=1) - log_c, 0.0))


def predicted_acceptance(ref: NoiseLayout, target: NoiseLayout, k: int) -> float:
    """Expected acceptance rate of stratum ``k`` before any simulation."""
    if k == 0:
        return 1.0
    odds, tables, bounds = ratio_tables(ref, target)
    top = np.sort(bounds)[::-1][:k]
    if np.any(top == 0):
        return 0.0
    if ref.is_homogeneous and target.is_homogeneous and len(set(ref.channel_of)) == 1 and len(set(target.channel_of)) == 1:
        return float(np.exp(-np.log(top).sum() + k * np.log(odds[0])))
    # E_ref[prod odds * ratio] = e_k(odds_t) / e_k(odds_r), via Poisson-binomial laws
    g_r, g_t = ref.gammas, target.gammas
    pr, pt = poisson_binomial(g_r)[k], poisson_binomial(g_t)[k]
    if pr == 0:
        return 0.0
    log_mean = np.log(pt) - np.log(pr) - np.log1p(-g_t).sum() + np.log1p(-g_r).sum()
    return float(np.exp(log_mean - np.log(top).sum()))


def rejection_resample(pool, ref: NoiseLayout, target: NoiseLayout, uniforms=None, rng=None):
    """Accept each reference record with probability ``P/(c P_ref)``.

    Returns ``(accepted, rate, signs)``: the accepted sub-pool, the empirical
    acceptance rate and the accepted records' signs under the target layout.
    The ``f`` values are reused as they are.
    """
    M = len(pool)
    if M == 0:
        return pool, 1.0, np.zeros(0, dtype=np.int8)
    p_acc = acceptance_probabilities(pool.locations, pool.choices, ref, target)
    if uniforms is None:
        rng = rng if rng is not None else np.random.default_rng()
        uniforms = rng.random(M)
    mask = np.asarray(uniforms)[:M] < p_acc
    idx = np.flatnonzero(mask)
    sub = pool.__class__(pool.header, pool.locations[idx], pool.choices[idx],
                         pool.sign[idx], pool.f[idx])
    signs = config_signs(target, sub.locations, sub.choices) if len(idx) else np.zeros(0, dtype=np.int8)
    sub.sign = signs
    return sub, float(mask.mean()), signs
