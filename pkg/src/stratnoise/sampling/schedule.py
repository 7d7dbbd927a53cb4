"""Adaptive choice of sampled strata and logistic interpolation between them.

The interpolating curve is the four-parameter logistic in the offset
variable ``x = k - (B - C)``:

    F(k) = F_large + (F_small - F_large) / (1 + (x / C)^D)     for x > 0
    F(k) = F_small                                              for x <= 0

so ``B`` is the midpoint (``F(B)`` is the mean of the plateaus), ``C`` the
distance from the onset of the transition to the midpoint and ``D`` the
steepness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


def logistic(k, B, C, D, f_small=1.0, f_large=0.5):
    k = np.asarray(k, dtype=float)
    x = np.clip((k - B + C) / C, 0.0, None)
    with np.errstate(over="ignore", divide="ignore"):
        h = 1.0 / (1.0 + x ** D)
    return f_large + (f_small - f_large) * h


def _shape_and_grad(k, theta):
    """``h(k)`` and ``dh/d(B, log C, log D)``."""
    B, lc, ld = theta
    C, D = np.exp(lc), np.exp(ld)
    x = np.clip((k - B + C) / C, 0.0, None)
    pos = x > 0
    h = np.ones_like(k, dtype=float)
    g = np.zeros((k.size, 3))
    xp = x[pos]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        xd = xp ** D
        hp = 1.0 / (1.0 + xd)
        dh_dx = -D * xp ** (D - 1) * hp ** 2
        dh_dD = -xd * np.log(xp) * hp ** 2
    h[pos] = hp
    # x = (k - B)/C + 1
    dx_dB = -1.0 / C
    dx_dlc = -(k[pos] - B) / C
    g[pos, 0] = dh_dx * dx_dB
    g[pos, 1] = dh_dx * dx_dlc
    g[pos, 2] = dh_dD * D
    g = np.nan_to_num(g)
    return h, g


@dataclass
class LogisticFit:
    B: float
    C: float
    D: float
    f_small: float = 1.0
    f_large: float = 0.5
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    converged: bool = True
    plateau: bool = False
    chi2: float = 0.0
    iterations: int = 0

    def __call__(self, k):
        if self.plateau:
            return np.full(np.shape(k), self.f_small, dtype=float) if np.ndim(k) else float(self.f_small)
        return logistic(k, self.B, self.C, self.D, self.f_small, self.f_large)

    def shape(self, k):
        """``h(k)`` in [0, 1]: 1 on the small-k plateau, 0 on the large-k one."""
        return (self(k) - self.f_large) / (self.f_small - self.f_large)

    def gradient(self, k) -> np.ndarray:
        """``dF/d(B, C, D)`` at each ``k``."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if self.plateau:
            return np.zeros((k.size, 3))
        _, g = _shape_and_grad(k, (self.B, np.log(self.C), np.log(self.D)))
        g = g * (self.f_small - self.f_large)
        g[:, 1] /= self.C
        g[:, 2] /= self.D
        return g

    def band(self, k) -> np.ndarray:
        """One-sigma uncertainty of the interpolated ``F_k``."""
        g = self.gradient(k)
        return np.sqrt(np.clip(np.einsum("ij,jk,ik->i", g, self.covariance, g), 0, None))

    def to_dict(self) -> dict:
        return {"B": self.B, "C": self.C, "D": self.D, "f_small": self.f_small, "f_large": self.f_large,
                "covariance": np.asarray(self.covariance).tolist(), "converged": self.converged,
                "plateau": self.plateau, "chi2": self.chi2}


class FitError(RuntimeError):
    pass


def _initial_guess(k, F, fs, fl):
    h = np.clip((F - fl) / (fs - fl), 1e-6, 1 - 1e-6)
    order = np.argsort(k)
    k, h = k[order], h[order]
    # midpoint from the crossing of h = 1/2
    if h[-1] >= 0.5:
        B = k[-1] * 1.5
    elif h[0] <= 0.5:
        B = k[0]
    else:
        j = int(np.argmax(h < 0.5))
        k0, k1, h0, h1 = k[j - 1], k[j], h[j - 1], h[j]
        B = k0 + (h0 - 0.5) / (h0 - h1) * (k1 - k0)
    C = max(B - k[0], 1.0) * 0.8
    return np.array([B, np.log(C), np.log(3.0)])


def fit_logistic(k, F, variance, f_small: float = 1.0, f_large: float = 0.5,
                 max_iter: int = 200, tol: float = 1e-12, start=None) -> LogisticFit:
    """Weighted least-squares fit of ``(B, C, D)`` with weights ``1/variance``.

    Levenberg-Marquardt damping on ``(B, log C, log D)``; the covariance is
    ``(J^T W J)^-1`` at the optimum, transformed to ``(B, C, D)``.
    """
    k = np.asarray(k, dtype=float)
    F = np.asarray(F, dtype=float)
    var = np.asarray(variance, dtype=float)
    if k.size < 3:
        raise FitError("logistic fit needs at least three points")
    if not np.all(np.isfinite(var)):
        raise FitError("variances must be finite")
    floor = max(1e-30, 1e-12 * np.max(var)) if np.max(var) > 0 else 1e-30
    wts = 1.0 / np.maximum(var, floor)
    amp = f_small - f_large
    if np.all(np.abs(F - f_small) <= 2 * np.sqrt(var) + 1e-12):
        return LogisticFit(np.inf, 1.0, 1.0, f_small, f_large, np.zeros((3, 3)), True, True, 0.0, 0)
    theta = np.asarray(start, dtype=float) if start is not None else _initial_guess(k, F, f_small, f_large)

    def resid(th):
        h, g = _shape_and_grad(k, th)
        return F - (f_large + amp * h), amp * g

    r, J = resid(theta)
    cost = float(np.sum(wts * r ** 2))
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        JW = J.T * wts
        Hm = JW @ J
        grad = JW @ r
        step = None
        for _ in range(60):
            A = Hm + lam * np.diag(np.maximum(np.diag(Hm), 1e-12))
            try:
                step = np.linalg.solve(A, grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = theta + step
            trial[1:] = np.clip(trial[1:], -20, 20)
            r2, J2 = resid(trial)
            c2 = float(np.sum(wts * r2 ** 2))
            if c2 <= cost:
                break
            lam *= 10
        else:
            break
        rel = (cost - c2) / max(cost, 1e-300)
        theta, r, J, cost = trial, r2, J2, c2
        lam = max(lam / 10, 1e-12)
        if rel < tol or cost < 1e-28 or np.max(np.abs(step)) < 1e-13 * (1 + np.max(np.abs(theta))):
            converged = True
            break
    JW = J.T * wts
    try:
        cov_t = np.linalg.inv(JW @ J)
    except np.linalg.LinAlgError:
        cov_t = np.linalg.pinv(JW @ J)
        converged = False
    B, C, D = theta[0], float(np.exp(theta[1])), float(np.exp(theta[2]))
    jac = np.diag([1.0, C, D])
    cov = jac @ cov_t @ jac
    return LogisticFit(float(B), C, D, f_small, f_large, cov, converged, False, cost, it)


def piecewise_linear(k_points, F_points, f_small: float = 1.0, f_large: float = 0.5):
    """Monotone fallback interpolation anchored at the plateaus."""
    kp = np.asarray(k_points, dtype=float)
    Fp = np.minimum.accumulate(np.asarray(F_points, dtype=float)[np.argsort(kp)])
    kp = np.sort(kp)

    def interp(k):
        return np.interp(k, kp, Fp, left=Fp[0], right=Fp[-1])
    return interp


# ----------------------------------------------------------------------
# adaptive schedule


@dataclass
class ScheduleResult:
    points: dict  # k -> (F, std)
    constant: Optional[float]
    k_pl: Optional[int]
    k_dev: Optional[int]
    converged: bool
    samples_used: int = 0

    @property
    def ks(self) -> list:
        return sorted(self.points)


def _consistent(a, b, factor=2.0) -> bool:
    (fa, sa), (fb, sb) = a, b
    return abs(fa - fb) <= factor * np.hypot(sa, sb)


def adaptive_k_schedule(evaluator: Callable, t: int, A: int, budget: Optional[int] = None,
                        sides: str = "both", extend_past_deviation: bool = True) -> ScheduleResult:
    """Choose which strata to sample.

    ``evaluator(k)`` returns ``(F_k, std_k, samples_used)``.  Probes ``k = t+1``
    (and ``k = A`` when ``sides="both"``), doubles from the left and halves from
    the right while estimates stay consistent with their plateau, then
    bisects between the last consistent and the first deviating ``k``.
    """
    if not t < A:
        raise ValueError("need t < A")
    points: dict = {}
    used = [0]

    def ev(k):
        if k not in points:
            if budget is not None and used[0] >= budget:
                raise _Budget()
            f, s, m = evaluator(int(k))
            points[int(k)] = (float(f), float(s))
            used[0] += int(m)
        return points[int(k)]

    k0 = t + 1
    try:
        left = ev(k0)
        if sides == "both":
            right = ev(A)
            if _consistent(left, right):
                return ScheduleResult(points, 0.5 * (left[0] + right[0]), None, None, True, used[0])
        k_pl, k_dev = None, None
        plateau = left
        k = k0
        while 2 * k <= A:
            cur = ev(2 * k)
            if not _consistent(cur, left):
                k_pl, k_dev = k, 2 * k
                if extend_past_deviation and 4 * k <= A:
                    ev(4 * k)
                break
            k *= 2
        if k_dev is None and sides == "both":
            # approach from the right until leaving the large-k plateau
            plateau = right
            k = A
            while k // 2 > k0:
                if not _consistent(ev(k // 2), right):
                    k_pl, k_dev = k, k // 2
                    break
                k //= 2
        if k_dev is None:
            return ScheduleResult(points, left[0], None, None, True, used[0])
        # bisect between the plateau-consistent k_pl and the deviating k_dev
        a, b = k_pl, k_dev
        while abs(b - a) > 1:
            mid = (a + b) // 2
            if _consistent(ev(mid), plateau):
                a = mid
            else:
                b = mid
        return ScheduleResult(points, None, a, b, True, used[0])
    except _Budget:
        return ScheduleResult(points, None, None, None, False, used[0])


class _Budget(Exception):
    pass
