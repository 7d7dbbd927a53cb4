"""Stratified sampling engine: pools, convergence loop and interpolation.

Readouts are vectors; a linear ``score`` (weights, offset) maps a readout to
the scalar fidelity that drives convergence, the adaptive schedule and the
logistic fit.
"""

from __future__ import annotations

import math
import multiprocessing as mp
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import norm

from ..circuit import CircuitSpec, FaultConfiguration, NoiseLayout, execute, readout, run_configuration
from .estimators import EstimateResult, StratumEstimate, ZeroSignSum, stratified_estimate
from .pools import SamplePool, pool_filename
from .rejection import predicted_acceptance, rejection_resample
from .rng import acceptance_uniforms, sample_stream
from .schedule import FitError, LogisticFit, adaptive_k_schedule, fit_logistic
from .strata import SamplingError, poisson_binomial, sample_configuration

# ----------------------------------------------------------------------
# workers

_WORK: dict = {}


def _simulate_range(args):
    key, k, seed, start, stop = args
    circuit, layout, method = _WORK[key]
    return _simulate(circuit, layout, k, seed, start, stop, method)


def _simulate(circuit, layout, k, seed, start, stop, method="auto"):
    n = stop - start
    locs = np.zeros((n, k), dtype=np.int64)
    choices = np.zeros((n, k), dtype=np.int64)
    signs = np.zeros(n, dtype=np.int8)
    f = np.zeros((n, circuit.readout_size))
    for j, i in enumerate(range(start, stop)):
        rng = sample_stream(seed, k, i)
        config = sample_configuration(k, layout, rng, method)
        point = run_configuration(circuit, config, rng)
        locs[j] = config.locations
        choices[j] = config.choices
        signs[j] = config.sign
        f[j] = point.f
    return locs, choices, signs, f


def simulate_batch(circuit, layout, k, seed, start, stop, workers: int = 1, method: str = "auto"):
    """Records ``start..stop-1`` of stratum ``k``; identical for any worker count."""
    if workers <= 1 or stop - start < 2 * workers:
        return _simulate(circuit, layout, k, seed, start, stop, method)
    key = id(circuit), id(layout)
    _WORK[key] = (circuit, layout, method)
    edges = np.linspace(start, stop, workers + 1).astype(int)
    try:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers) as pool:
            parts = pool.map(_simulate_range, [(key, k, seed, a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a])
    finally:
        _WORK.pop(key, None)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


class PoolStore:
    """Reference pools per ``(layout, k)``, cached in memory and optionally on disk."""

    def __init__(self, circuit: CircuitSpec, seed: int = 0, pool_dir=None, workers: int = 1, method: str = "auto"):
        self.circuit = circuit
        self.seed = int(seed)
        self.dir = Path(pool_dir) if pool_dir is not None else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
        self.workers = workers
        self.method = method
        self.simulations = 0
        self._pools: dict = {}
        self._chash = circuit.hash()

    def path(self, layout: NoiseLayout, k: int) -> Optional[Path]:
        if self.dir is None:
            return None
        return self.dir / pool_filename(self._chash, layout.hash(), k, self.seed)

    def existing(self, layout: NoiseLayout, k: int) -> int:
        key = (layout.hash(), k)
        if key in self._pools:
            return len(self._pools[key])
        p = self.path(layout, k)
        if p is not None and p.exists():
            return len(self.get(layout, k, 0))
        return 0

    def get(self, layout: NoiseLayout, k: int, M: int) -> SamplePool:
        key = (layout.hash(), k)
        pool = self._pools.get(key)
        if pool is None:
            p = self.path(layout, k)
            if p is not None and p.exists():
                pool = SamplePool.load(p)
                if pool.header["circuit"] != self._chash or pool.header["layout"] != key[0]:
                    raise SamplingError(f"pool {p} belongs to another circuit or layout")
            else:
                pool = SamplePool.empty(self._chash, key[0], k, [d.gamma for d in layout.decomps],
                                        self.seed, self.circuit.readout_size)
            self._pools[key] = pool
        if len(pool) < M:
            start = len(pool)
            batch = simulate_batch(self.circuit, layout, k, self.seed, start, M, self.workers, self.method)
            pool.extend(*batch)
            self.simulations += M - start
            p = self.path(layout, k)
            if p is not None:
                pool.save(p)
        return pool.head(M) if M else pool


# ----------------------------------------------------------------------
# settings


@dataclass
class Precision:
    """Target: ``relative`` half-width at ``confidence`` on the infidelity
    ``score_small - score``, or an absolute ``target_std``."""

    relative: float = 0.1
    confidence: float = 0.99
    target_std: Optional[float] = None
    floor_std: float = 1e-15

    def std_for(self, infidelity: float) -> float:
        if self.target_std is not None:
            return self.target_std
        z = norm.ppf(0.5 + self.confidence / 2)
        return max(self.relative * abs(infidelity) / z, self.floor_std)


@dataclass
class EngineSettings:
    precision: Precision = field(default_factory=Precision)
    pilot: int = 100
    max_rounds: int = 30
    budget: int = 200_000  # reference samples over all strata
    max_direct: int = 8  # beyond this many relevant strata, use the adaptive schedule
    schedule_M: int = 1000
    schedule_sides: str = "left"
    tail_fraction: float = 0.1
    zero_sign_retries: int = 8
    min_samples: int = 100
    t: Optional[int] = None
    f_large: Optional[float] = None


def default_score(circuit: CircuitSpec):
    sc = circuit.meta.get("score")
    if sc is not None:
        return np.asarray(sc[0], dtype=float), float(sc[1])
    w = np.zeros(circuit.readout_size)
    w[-1] = 1.0
    return w, 0.0


class StratifiedEngine:
    """Estimate a circuit's readout under a target layout from reference pools."""

    def __init__(self, circuit: CircuitSpec, seed: int = 0, pool_dir=None, workers: int = 1,
                 settings: Optional[EngineSettings] = None, store: Optional[PoolStore] = None):
        self.circuit = circuit
        self.settings = settings or EngineSettings()
        self.store = store or PoolStore(circuit, seed, pool_dir, workers)
        self.seed = self.store.seed
        self.score_w, self.score_b = default_score(circuit)
        self.t = self.settings.t if self.settings.t is not None else int(circuit.meta.get("t", 0))
        self._ideal = None
        self._k0_exact = None

    # -- plateau vectors
    def score(self, f) -> np.ndarray:
        return np.asarray(f, dtype=float) @ self.score_w + self.score_b

    @property
    def ideal(self) -> np.ndarray:
        if self._ideal is None:
            meta = self.circuit.meta.get("ideal_readout")
            if meta is not None:
                self._ideal = np.asarray(meta, dtype=float)
                self._k0_exact = True
            else:
                counter = _Counting(np.random.default_rng(self.seed))
                t, rec = execute(self.circuit, {}, counter)
                self._ideal = readout(self.circuit, t, rec, counter)
                self._k0_exact = counter.calls == 0
        return self._ideal

    @property
    def plateau(self) -> np.ndarray:
        L = self.circuit.meta.get("plateau_readout")
        L = np.zeros(self.circuit.readout_size) if L is None else np.asarray(L, dtype=float)
        if self.settings.f_large is not None:
            S = self.ideal
            s_S, s_L = self.score(S), self.score(L)
            if s_S != s_L:
                L = L + (S - L) * (self.settings.f_large - s_L) / (s_S - s_L)
        return L

    # -- strata
    def stratum(self, ref: NoiseLayout, target: NoiseLayout, k: int, M: int) -> StratumEstimate:
        """Self-normalized estimate from the first ``M`` reference records,
        rejection re-sampled to ``target``; enlarges ``x2`` on a zero sign sum."""
        for attempt in range(self.settings.zero_sign_retries + 1):
            pool = self.store.get(ref, k, M)
            if ref.hash() == target.hash():
                acc, rate, signs = pool, 1.0, pool.sign
            else:
                u = acceptance_uniforms(self.seed, k, M)
                acc, rate, signs = rejection_resample(pool, ref, target, uniforms=u)
            try:
                if len(signs) == 0:
                    raise ZeroSignSum("no accepted samples")
                return StratumEstimate.from_samples(k, signs, acc.f, acceptance=rate)
            except ZeroSignSum:
                M *= 2
        raise ZeroSignSum(f"stratum k={k} has a zero sign sum after {self.settings.zero_sign_retries} enlargements")

    def relevant_strata(self, p_k: np.ndarray, tol: float) -> list:
        """Strata above ``t`` in decreasing ``P(k)`` until the excluded mass is below ``tol``."""
        A = len(p_k) - 1
        ks = np.arange(self.t + 1, A + 1)
        order = ks[np.argsort(-p_k[ks], kind="stable")]
        rest = float(p_k[ks].sum())
        chosen = []
        for k in order:
            if rest <= tol or p_k[k] == 0:
                break
            chosen.append(int(k))
            rest -= p_k[k]
        return sorted(chosen)

    # -- main entry
    def estimate(self, target: NoiseLayout, ref: Optional[NoiseLayout] = None) -> EstimateResult:
        ref = ref if ref is not None else target
        st = self.settings
        p_k = poisson_binomial(target.gammas)
        S = self.ideal
        fixed = {k: StratumEstimate.fixed(k, S, "prior") for k in range(0, self.t + 1)}
        if self.t == 0 and not self._k0_exact:
            fixed = {}
        if st.precision.target_std is not None:
            tol = st.tail_fraction * st.precision.target_std
        else:
            # refined once the infidelity scale is known
            tol = 1e-3 * float(p_k[self.t + 1:].sum())
        K = self.relevant_strata(p_k, tol)
        if self.t == 0 and not self._k0_exact:
            K = sorted(set(K) | {0})
        if len(K) > st.max_direct:
            return self._estimate_adaptive(target, ref, p_k, fixed, K)
        return self._estimate_direct(target, ref, p_k, fixed, K)

    def _combine(self, p_k, fixed, ests, K, fit=None, extra_cov=None):
        strata = dict(fixed)
        strata.update(ests)
        allK = sorted(strata)
        excluded_mass = 1.0 - float(sum(p_k[k] for k in allK))
        d = self.circuit.readout_size
        if excluded_mass > 0:
            acc = np.zeros(d)
            mass = 0.0
            sampled = sorted(ests)
            A = len(p_k) - 1
            for k in range(A + 1):
                if k in strata or p_k[k] == 0:
                    continue
                acc += p_k[k] * self._fill_value(k, strata, sampled, fit)
                mass += p_k[k]
            f_not = acc / mass if mass > 0 else self.plateau
        else:
            f_not = self.plateau
        return stratified_estimate(strata, p_k, allK, f_not, extra_cov, fit)

    def _fill_value(self, k, strata, sampled, fit):
        if k <= self.t:
            return self.ideal
        if fit is not None:
            return self._interp(fit, k)
        if not sampled:
            return self.plateau
        nearest = min(sampled, key=lambda j: (abs(j - k), j))
        return strata[nearest].f_sn

    def _interp(self, fit: LogisticFit, k):
        """Readout at ``k``: fitted score deviation along the local error direction."""
        S, L = self.ideal, self.plateau
        fs, fl = float(self.score(S)), float(self.score(L))
        drop = (fs - fl) * (1.0 - float(fit.shape(float(k))))
        return S - self._dirs(k) * drop

    def _directions(self, ests):
        """``k -> u_k`` with ``F_k = ideal + u_k (score_k - score_ideal)``.

        Taken from sampled strata whose score deviation is resolved (above two
        standard deviations), linear in ``k`` between them and held constant
        outside; the ideal-to-plateau line when none is resolved.  Keeps the
        anisotropy of the logical channel that the scalar fit cannot see.
        """
        S, L = self.ideal, self.plateau
        fs, fl = float(self.score(S)), float(self.score(L))
        iso = (L - S) / (fl - fs) if fs != fl else np.zeros_like(S)
        w = self.score_w
        ks, us = [], []
        for k in sorted(ests):
            e = ests[k]
            dev = float(self.score(e.f_sn)) - fs
            if abs(dev) > 2.0 * math.sqrt(max(w @ e.covariance @ w, 0.0)) and dev != 0.0:
                ks.append(k)
                us.append((e.f_sn - S) / dev)
        if not ks:
            return lambda k: iso
        us = np.array(us)
        return lambda k: np.array([np.interp(k, ks, us[:, j]) for j in range(us.shape[1])])

    def _infidelity(self, res: EstimateResult) -> float:
        return float(self.score(self.ideal) - self.score(res.f_hat))

    def _estimate_direct(self, target, ref, p_k, fixed, K):
        st = self.settings
        M = {k: st.pilot for k in K}
        converged = False
        ests = {}
        failed = []
        for rnd in range(st.max_rounds):
            ests = {}
            for k in K:
                try:
                    ests[k] = self.stratum(ref, target, k, M[k])
                except ZeroSignSum:
                    failed.append(k)
            K = [k for k in K if k in ests]
            res = self._combine(p_k, fixed, ests, K)
            amp = max(float(self.score(self.ideal) - self.score(self.plateau)), 1e-3)
            # until failures show up, aim at the infidelity one failure per stratum would give
            resolution = amp * sum(p_k[k] / (M[k] + 1) for k in K)
            tstd = st.precision.std_for(max(self._infidelity(res), resolution))
            K_new = self.relevant_strata(p_k, st.tail_fraction * tstd)
            added = [k for k in K_new if k not in M and k not in failed]
            for k in added:
                M[k] = st.pilot
            if added:
                K = sorted(set(K) | set(added))
                continue
            grow = {}
            sd1 = {}
            for k in K:
                e = ests[k]
                v1 = e.per_sample_variance(self.score_w)
                sd1[k] = math.sqrt(max(v1, amp ** 2 / (e.M_k + 1)))
            # Neyman: M_k = P(k) sd_k sum_j P(j) sd_j / target^2 minimizes the total
            total_sd = sum(p_k[k] * sd1[k] for k in K)
            for k in K:
                e = ests[k]
                need = p_k[k] * sd1[k] * total_sd / tstd ** 2
                need_ref = math.ceil(need / max(e.acceptance, 1e-3))
                need_ref = max(need_ref, st.min_samples)
                if need_ref > M[k]:
                    grow[k] = min(need_ref, 2 * M[k] if rnd < st.max_rounds - 1 else need_ref)
            if not grow:
                converged = True
                break
            total = sum(M.values())
            if total >= st.budget:
                break
            scale = min(1.0, (st.budget - total) / max(sum(grow[k] - M[k] for k in grow), 1))
            for k, m in grow.items():
                M[k] = max(M[k] + 1, int(M[k] + (m - M[k]) * scale))
        res = self._combine(p_k, fixed, ests, K)
        res.meta.update(self._meta(ref, target, ests, converged, failed, mode="direct"))
        return res

    def _estimate_adaptive(self, target, ref, p_k, fixed, K):
        st = self.settings
        ests: dict = {}
        A = len(p_k) - 1
        sched_M = {}

        def evaluator(k):
            e = self.stratum(ref, target, k, st.schedule_M)
            ests[k] = e
            sched_M[k] = st.schedule_M
            w = self.score_w
            return float(self.score(e.f_sn)), float(np.sqrt(max(w @ e.covariance @ w, 0.0))), st.schedule_M

        sched = adaptive_k_schedule(evaluator, self.t, A, budget=st.budget, sides=st.schedule_sides)
        if ests and max(K) > max(ests) and sum(sched_M.values()) + st.schedule_M <= st.budget:
            # anchor the fit at the top of the relevant range instead of extrapolating to it
            evaluator(max(K))
        fit = None
        ks = sorted(ests)
        fs, fl = float(self.score(self.ideal)), float(self.score(self.plateau))
        if len(ks) >= 3:
            vals = np.array([self.score(ests[k].f_sn) for k in ks])
            var = np.array([max(self.score_w @ ests[k].covariance @ self.score_w, 1e-12) for k in ks])
            try:
                fit = fit_logistic(ks, vals, var, fs, fl)
            except FitError:
                fit = None
        extra = None
        interp = {}
        self._dirs = self._directions(ests)
        if fit is not None and not fit.plateau:
            G = np.zeros((self.circuit.readout_size, 3))
            for k in K:
                if k in ests:
                    continue
                v = self._interp(fit, k)
                interp[k] = StratumEstimate.fixed(k, v, "logistic")
                G += p_k[k] * np.outer(self._dirs(k), fit.gradient(k)[0])
            extra = G @ fit.covariance @ G.T
        elif fit is not None:
            for k in K:
                if k not in ests:
                    interp[k] = StratumEstimate.fixed(k, self.ideal, "logistic")
        strata = dict(ests)
        strata.update(interp)
        res = self._combine(p_k, fixed, strata, K, fit, extra)
        # strata outside K that were sampled still enter with their estimates
        res.meta.update(self._meta(ref, target, ests, sched.converged, [], mode="adaptive"))
        res.meta["schedule"] = {"ks": sched.ks, "k_pl": sched.k_pl, "k_dev": sched.k_dev,
                                "constant": sched.constant}
        return res

    def _meta(self, ref, target, ests, converged, failed, mode):
        return {
            "mode": mode, "converged": bool(converged), "failed_strata": sorted(set(failed)),
            "reference_samples": int(sum(e.M_k / max(e.acceptance, 1e-12) for e in ests.values() if e.source == "sampled")),
            "acceptance": {int(k): float(e.acceptance) for k, e in ests.items()},
            "simulations": self.store.simulations,
        }

    def predicted_acceptance(self, ref: NoiseLayout, target: NoiseLayout, ks) -> float:
        return min((predicted_acceptance(ref, target, k) for k in ks), default=1.0)


class _Counting:
    def __init__(self, rng):
        self.rng = rng
        self.calls = 0

    def random(self, *a):
        self.calls += 1
        return self.rng.random(*a)


# ----------------------------------------------------------------------
# unstratified baseline


def standard_is_estimate(circuit: CircuitSpec, layout: NoiseLayout, M: int, rng) -> EstimateResult:
    """Plain importance sampling over all locations with ``p = |q|/alpha``;
    weights ``w = prod sgn(q) alpha``."""
    if M < 1:
        raise SamplingError("M must be at least 1")
    A = layout.A
    tabs = []
    for d in layout.decomps:
        q = np.asarray(d.q, dtype=float)
        idx = np.flatnonzero(q)
        alpha = np.abs(q[idx]).sum()
        tabs.append((np.cumsum(np.abs(q[idx]) / alpha), idx, np.sign(q[idx]), alpha))
    vals = []
    weights = []
    for _ in range(M):
        faults = {}
        w = 1.0
        u = rng.random(A)
        for a in range(A):
            cum, idx, sg, alpha = tabs[layout.channel_of[a]]
            j = min(int(np.searchsorted(cum, u[a] * cum[-1], side="right")), len(cum) - 1)
            w *= sg[j] * alpha
            if idx[j] != 0:
                faults[a] = int(idx[j])
        locs = np.array(sorted(faults), dtype=np.int64)
        config = FaultConfiguration(locs, [faults[a] for a in locs])
        vals.append(run_configuration(circuit, config, rng).f)
        weights.append(w)
    f = np.array(vals)
    w = np.array(weights)
    wf = w[:, None] * f
    f_hat = wf.mean(axis=0)
    cov = np.atleast_2d(np.cov(wf, rowvar=False, bias=False)) / M if M > 1 else np.zeros((f.shape[1],) * 2)
    std = np.sqrt(np.clip(np.diag(cov), 0, None))
    p_k = poisson_binomial(layout.gammas)
    return EstimateResult(f_hat, std, {}, p_k, [], f_hat, None, cov, np.zeros_like(f_hat),
                          {"mode": "standard", "M": M, "mean_weight": float(w.mean())})
