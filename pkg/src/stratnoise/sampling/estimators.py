"""Self-normalized stratum estimators and their stratified combination."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .strata import SamplingError


class ZeroSignSum(SamplingError):
    """The signs of a batch cancel exactly; the batch must be enlarged."""


def _as_arrays(points, f=None):
    if f is not None:
        return np.asarray(points, dtype=float), np.asarray(f, dtype=float)
    if hasattr(points, "sign") and hasattr(points, "f"):
        return np.asarray(points.sign, dtype=float), np.asarray(points.f, dtype=float)
    signs = np.array([p.config.sign for p in points], dtype=float)
    vals = np.array([np.atleast_1d(p.f) for p in points], dtype=float)
    return signs, vals


def self_normalized_estimate(points, f=None, cov: bool = False):
    """``(f_sn, variance, bias)`` for one stratum.

    ``points`` is a pool, a list of ``SamplePoint`` or (with ``f``) a sign
    array.  The delta-method variance and bias use the weights ``w = sgn/mean(sgn)``,
    the empirical form of ``sgn * beta^k`` (both have unit mean), so no
    ``beta`` enters.  With ``cov=True`` the full covariance of a vector
    readout is returned in place of the variance.
    """
    s, vals = _as_arrays(points, f)
    scalar = vals.ndim == 1
    v = vals.reshape(len(s), -1)
    M = len(s)
    if M < 1:
        raise SamplingError("self-normalized estimate needs at least one sample")
    total = s.sum()
    if total == 0:
        raise ZeroSignSum("sum of signs is zero; enlarge the batch")
    f_sn = (s @ v) / total
    sbar = total / M
    dev = f_sn - v  # (M, d)
    # w^2 = 1 / sbar^2 for every sample since sgn^2 = 1
    bias = dev.mean(axis=0) / (M * sbar ** 2)
    if cov:
        second = dev.T @ dev / (M * M * sbar ** 2)
        return (f_sn[0] if scalar else f_sn), (second[0, 0] if scalar else second), (bias[0] if scalar else bias)
    var = (dev ** 2).mean(axis=0) / (M * sbar ** 2)
    if scalar:
        return f_sn[0], var[0], bias[0]
    return f_sn, var, bias


@dataclass
class StratumEstimate:
    k: int
    M_k: int
    f_sn: np.ndarray
    variance: np.ndarray
    bias: np.ndarray
    cov: Optional[np.ndarray] = None
    sign_mean: float = 1.0
    acceptance: float = 1.0
    source: str = "sampled"  # sampled | prior | logistic
    pool: object = None

    @classmethod
    def from_samples(cls, k: int, signs, f, **kw) -> "StratumEstimate":
        s = np.asarray(signs, dtype=float)
        f = np.atleast_2d(np.asarray(f, dtype=float).reshape(len(s), -1))
        f_sn, c, bias = self_normalized_estimate(s, f, cov=True)
        return cls(k, len(s), f_sn, np.diag(c).copy(), bias, c, float(s.mean()), **kw)

    @classmethod
    def fixed(cls, k: int, value, source: str = "prior", variance=None) -> "StratumEstimate":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        var = np.zeros_like(v) if variance is None else np.atleast_1d(np.asarray(variance, dtype=float))
        return cls(k, 0, v, var, np.zeros_like(v), np.diag(var), 1.0, 1.0, source)

    @property
    def covariance(self) -> np.ndarray:
        return self.cov if self.cov is not None else np.diag(self.variance)

    def per_sample_variance(self, weights=None) -> float:
        """``M_k`` times the variance of the (optionally projected) estimate."""
        if weights is None:
            return float(self.M_k * np.max(self.variance))
        w = np.asarray(weights, dtype=float)
        return float(self.M_k * w @ self.covariance @ w)

    def to_dict(self) -> dict:
        return {
            "k": int(self.k), "M_k": int(self.M_k), "f_sn": np.asarray(self.f_sn).tolist(),
            "variance": np.asarray(self.variance).tolist(), "bias": np.asarray(self.bias).tolist(),
            "sign_mean": float(self.sign_mean), "acceptance": float(self.acceptance), "source": self.source,
        }


@dataclass
class EstimateResult:
    f_hat: np.ndarray
    std: np.ndarray
    strata: dict
    p_k: np.ndarray
    K: list
    f_not_k: np.ndarray
    interpolation: object = None
    cov: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def P_K(self) -> float:
        return float(sum(self.p_k[k] for k in self.K))

    def reconstruct(self) -> np.ndarray:
        """``(1 - P_K) F_notK + sum_k P(k) F_k`` from the stored parts."""
        out = (1.0 - self.P_K) * np.asarray(self.f_not_k, dtype=float)
        for k in self.K:
            out = out + self.p_k[k] * self.strata[k].f_sn
        return out

    @property
    def total_samples(self) -> int:
        return int(sum(s.M_k for s in self.strata.values() if s.source == "sampled"))

    def project(self, weights, offset: float = 0.0):
        """Mean and standard deviation of ``offset + weights . F``."""
        w = np.asarray(weights, dtype=float)
        c = self.cov if self.cov is not None else np.diag(np.asarray(self.std) ** 2)
        return float(offset + w @ self.f_hat), float(np.sqrt(max(w @ c @ w, 0.0)))


def stratified_estimate(strata: dict, p_k, K, f_not_k, extra_cov=None, interpolation=None) -> EstimateResult:
    """Combine stratum estimates: ``F = (1-P_K) F_notK + sum_{k in K} P(k) F_k``.

    Variances add as ``sum P(k)^2 V_k``; ``extra_cov`` carries correlated
    contributions (a shared interpolation fit).
    """
    K = sorted(int(k) for k in K)
    if not K:
        raise SamplingError("the sampled stratum set is empty")
    missing = [k for k in K if k not in strata]
    if missing:
        raise SamplingError(f"missing strata {missing}")
    p = np.asarray(p_k, dtype=float)
    fnk = np.atleast_1d(np.asarray(f_not_k, dtype=float))
    d = np.atleast_1d(strata[K[0]].f_sn).size
    P_K = float(sum(p[k] for k in K))
    f_hat = (1.0 - P_K) * fnk * np.ones(d)
    cov = np.zeros((d, d))
    bias = np.zeros(d)
    for k in K:
        s = strata[k]
        f_hat = f_hat + p[k] * s.f_sn
        cov += p[k] ** 2 * s.covariance
        bias += p[k] * s.bias
    if extra_cov is not None:
        cov += extra_cov
    std = np.sqrt(np.clip(np.diag(cov), 0, None))
    return EstimateResult(f_hat, std, dict(strata), p, K, fnk * np.ones(d), interpolation, cov, bias)


def allocate_samples(p_k, sigma_k, M: int) -> dict:
    """Split ``M`` over strata with ``M_k`` proportional to ``P(k) sigma_k``.

    ``p_k`` and ``sigma_k`` are dicts keyed by stratum (or aligned arrays);
    ``sigma_k=None`` falls back to ``M_k`` proportional to ``P(k)``.  Every
    stratum gets at least one sample and leftovers go to the largest
    fractional parts.
    """
    if isinstance(p_k, dict):
        keys = sorted(p_k)
        p = np.array([p_k[k] for k in keys], dtype=float)
        sig = None if sigma_k is None else np.array([sigma_k[k] for k in keys], dtype=float)
    else:
        p = np.asarray(p_k, dtype=float)
        keys = list(range(p.size))
        sig = None if sigma_k is None else np.asarray(sigma_k, dtype=float)
    n = len(keys)
    if M < n:
        raise SamplingError(f"M={M} cannot cover {n} strata")
    w = p if sig is None else p * sig
    if w.sum() <= 0:
        w = p if p.sum() > 0 else np.ones(n)
    ideal = M * w / w.sum()
    base = np.maximum(np.floor(ideal).astype(np.int64), 1)
    excess = base.sum() - M
    while excess > 0:
        j = int(np.argmax(base))
        take = min(excess, base[j] - 1)
        base[j] -= take
        excess -= take
    left = M - base.sum()
    if left > 0:
        frac = ideal - np.floor(ideal)
        order = np.lexsort((np.arange(n), -frac))
        for j in order[:left]:
            base[j] += 1
    return {k: int(m) for k, m in zip(keys, base)}
