"""Single-qubit CPTP channels and their stabilizer-channel decompositions.

A channel is written as a quasiprobability mixture of dictionary channels,
``E = sum_mu q_mu S_mu``, with the L1 norm of ``q`` minimized by linear
programming on Pauli transfer matrices.  The weak-noise form splits off the
identity: ``E = (1 - gamma) I + gamma F`` with ``F = sum_i r_i S_i``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from . import dictionary as _dict
from .dictionary import StabilizerChannelId
from .lp import LPError, l1_minimize

TP_TOL = 1e-10

_SIGMA = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class KrausChannel:
    kraus_ops: tuple
    name: str = ""

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ChannelError("a channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (2, 2):
                raise ChannelError(f"Kraus operators must be 2x2, got {k.shape}")
        gram = sum(k.conj().T @ k for k in ops)
        err = np.abs(gram - np.eye(2)).max()
        if err > TP_TOL:
            raise ChannelError(f"channel is not trace preserving (deviation {err:.3g})")
        object.__setattr__(self, "kraus_ops", ops)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def ptm(self) -> "PauliTransferMatrix":
        return kraus_to_ptm(self)


@dataclass(frozen=True)
class PauliTransferMatrix:
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (4, 4):
            raise ChannelError("a PTM is 4x4")
        object.__setattr__(self, "m", m)

    @property
    def is_trace_preserving(self) -> bool:
        return bool(np.abs(self.m[0] - [1, 0, 0, 0]).max() <= TP_TOL)


def kraus_to_ptm(ch: KrausChannel) -> PauliTransferMatrix:
    """``m[i][j] = Tr(sigma_i E(sigma_j)) / 2``."""
    m = np.empty((4, 4))
    for j, sj in enumerate(_SIGMA):
        out = ch.apply(sj)
        for i, si in enumerate(_SIGMA):
            m[i, j] = 0.5 * np.trace(si @ out).real
    return PauliTransferMatrix(m)


@lru_cache(maxsize=None)
def _dictionary_matrix() -> np.ndarray:
    """Columns are the 12 non-trivial PTM entries of each dictionary channel."""
    cols = []
    for cid in _dict.dictionary():
        m = kraus_to_ptm(KrausChannel(tuple(_dict.channel_kraus(cid)))).m
        cols.append(m[1:, :].ravel())
    a = np.array(cols).T
    # affine span: differences from the identity must have rank 12
    rank = np.linalg.matrix_rank(a[:, 1:] - a[:, :1], tol=1e-9)
    if rank != 12:  # pragma: no cover
        raise ChannelError(f"dictionary spans an affine space of rank {rank}, expected 12")
    return a


def dictionary_ptms() -> list[tuple[StabilizerChannelId, PauliTransferMatrix]]:
    a = _dictionary_matrix()
    out = []
    for j, cid in enumerate(_dict.dictionary()):
        m = np.zeros((4, 4))
        m[0, 0] = 1.0
        m[1:, :] = a[:, j].reshape(3, 4)
        out.append((cid, PauliTransferMatrix(m)))
    return out


def affine_rank() -> int:
    a = _dictionary_matrix()
    return int(np.linalg.matrix_rank(a[:, 1:] - a[:, :1], tol=1e-9))


# ----------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class StabilizerDecomposition:
    """``q`` over the 33-entry dictionary plus the weak-noise form."""

    q: np.ndarray
    gamma: float
    fault_index: np.ndarray  # dictionary indices i with r_i != 0
    fault_r: np.ndarray
    eta: float
    nu: float
    beta: float
    target: np.ndarray = field(repr=False, default=None)

    @property
    def terms(self) -> list[tuple[StabilizerChannelId, float]]:
        ids = _dict.dictionary()
        return [(ids[i], float(v)) for i, v in enumerate(self.q) if v != 0.0]

    @property
    def fault_terms(self) -> list[tuple[StabilizerChannelId, float]]:
        ids = _dict.dictionary()
        return [(ids[i], float(r)) for i, r in zip(self.fault_index, self.fault_r)]

    @property
    def fault_probs(self) -> np.ndarray:
        """Sampling law ``|r_i| / beta`` of the fault channel terms."""
        if not len(self.fault_r):
            return np.zeros(0)
        return np.abs(self.fault_r) / self.beta

    @property
    def fault_signs(self) -> np.ndarray:
        return np.where(self.fault_r < 0, -1, 1).astype(np.int8)

    @property
    def l1(self) -> float:
        return float(np.abs(self.q).sum())

    def reconstruct_ptm(self) -> np.ndarray:
        a = _dictionary_matrix()
        m = np.zeros((4, 4))
        m[0, 0] = 1.0
        m[1:, :] = (a @ self.q).reshape(3, 4)
        return m


def _weak_form(q: np.ndarray):
    q0 = q[_dict.IDENTITY]
    rest = q.copy()
    rest[_dict.IDENTITY] = 0.0
    gamma = max(1.0 - q0, 0.0)
    if q0 > 1.0 + 1e-12:
        # excess identity weight goes into the fault channel
        warnings.warn(f"decomposition has q_0 = {q0:.6g} > 1; folding excess into the fault channel")
        gamma = float(np.abs(rest).sum())
        rest[_dict.IDENTITY] = q0 - (1.0 - gamma)
    if gamma <= 0.0:
        return 0.0, np.zeros(0, dtype=np.int64), np.zeros(0)
    idx = np.flatnonzero(rest)
    return float(gamma), idx.astype(np.int64), rest[idx] / gamma


def _polish(a_eq, b_eq, q, clean):
    """Drop round-off entries and re-solve the equalities on the support."""
    support = np.flatnonzero(np.abs(q) > clean)
    sol, *_ = np.linalg.lstsq(a_eq[:, support], b_eq, rcond=None)
    out = np.zeros_like(q)
    out[support] = sol
    if np.abs(a_eq @ out - b_eq).max() > 1e-12 or np.sign(sol).tolist() != np.sign(q[support]).tolist():
        q = q.copy()
        q[np.abs(q) <= clean] = 0.0
        return q
    return out


def decompose_ptm(m: np.ndarray, clean: float = 1e-11) -> StabilizerDecomposition:
    m = np.asarray(m, dtype=float)
    if np.abs(m[0] - [1, 0, 0, 0]).max() > TP_TOL:
        raise ChannelError("decomposition needs a trace-preserving channel")
    a = _dictionary_matrix()
    a_eq = np.vstack([a, np.ones(a.shape[1])])
    b_eq = np.append(m[1:, :].ravel(), 1.0)
    try:
        q = l1_minimize(a_eq, b_eq, prefer=_dict.IDENTITY)
    except LPError as exc:  # pragma: no cover
        raise ChannelError(f"decomposition LP failed: {exc}") from exc
    q = _polish(a_eq, b_eq, q, clean)
    # make sum(q) = 1 exact so that the r_i sum to one even for tiny gamma
    q[_dict.IDENTITY] = 1.0 - (q.sum() - q[_dict.IDENTITY])
    gamma, idx, r = _weak_form(q)
    eta = float(-q[q < 0].sum()) + 0.0
    nu = float(-r[r < 0].sum()) + 0.0 if len(r) else 0.0
    return StabilizerDecomposition(
        q=q, gamma=gamma, fault_index=idx, fault_r=r, eta=eta, nu=nu, beta=1.0 + 2.0 * nu, target=m,
    )


def decompose(ch: KrausChannel) -> StabilizerDecomposition:
    """Minimal-negativity decomposition over the stabilizer-channel dictionary."""
    return decompose_ptm(kraus_to_ptm(ch).m)


# ----------------------------------------------------------------------
# infidelity


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    rho = np.sqrt(1 - z * z)
    phi = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _bloch(theta, phi):
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def worst_case_point(m, grid: int = 20_000):
    """``(infidelity, n)``: the largest ``(1 - n.t - n.T n) / 2`` over unit
    Bloch vectors ``n`` for the PTM ``m`` (affine part ``t, T``).

    A Fibonacci grid locates the basin, then a quasi-Newton polish from the
    best few grid points refines it.
    """
    m = np.asarray(m, dtype=float)
    t = m[1:, 0]
    tt = m[1:, 1:]

    def infid(n):
        return 0.5 * (1.0 - n @ t - n @ tt @ n)

    pts = _fibonacci_sphere(grid)
    vals = 0.5 * (1.0 - pts @ t - np.einsum("ij,jk,ik->i", pts, tt, pts))
    j = int(np.argmax(vals))
    best, arg = float(vals[j]), pts[j]
    for j in np.argsort(vals)[-4:]:
        n0 = pts[j]
        x0 = [np.arccos(np.clip(n0[2], -1, 1)), np.arctan2(n0[1], n0[0])]
        res = minimize(lambda x: -infid(_bloch(*x)), x0, method="BFGS", options={"gtol": 1e-12})
        if -float(res.fun) > best:
            best, arg = -float(res.fun), _bloch(*res.x)
    return best, np.asarray(arg)


def worst_case_infidelity_ptm(m, grid: int = 20_000) -> float:
    best, _ = worst_case_point(m, grid)
    if best < 1e-14:
        return 0.0
    return float(min(best, 1.0))


def worst_case_infidelity(ch: KrausChannel, grid: int = 20_000) -> float:
    """Maximum over pure inputs of ``1 - <psi|E(psi)|psi>``."""
    return worst_case_infidelity_ptm(kraus_to_ptm(ch).m, grid)


@dataclass(frozen=True)
class ChannelReport:
    epsilon: float
    gamma: float
    eta: float
    nu: float

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "gamma": self.gamma, "eta": self.eta, "nu": self.nu}


def channel_report(ch: KrausChannel) -> ChannelReport:
    dec = decompose(ch)
    return ChannelReport(worst_case_infidelity(ch), dec.gamma, dec.eta, dec.nu)


# ----------------------------------------------------------------------
# channel families


def _check_prob(p, what="p"):
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"{what} must lie in [0, 1], got {p}")


def identity_channel() -> KrausChannel:
    return KrausChannel((np.eye(2),), name="identity")


def depolarizing(p: float) -> KrausChannel:
    _check_prob(p)
    a = np.sqrt(p / 3)
    return KrausChannel(
        (np.sqrt(1 - p) * _SIGMA[0], a * _SIGMA[1], a * _SIGMA[2], a * _SIGMA[3]), name=f"depolarizing({p})"
    )


def amplitude_damping(p: float) -> KrausChannel:
    _check_prob(p)
    e0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
    e1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    return KrausChannel((e0, e1), name=f"amplitude_damping({p})")


def z_rotation(theta: float) -> KrausChannel:
    """``|0><0| + e^{i theta} |1><1|``."""
    return KrausChannel((np.diag([1.0, np.exp(1j * theta)]),), name=f"z_rotation({theta})")


def unitary_channel(u: np.ndarray, name: str = "unitary") -> KrausChannel:
    return KrausChannel((np.asarray(u, dtype=complex),), name=name)


def random_unitary(delta: float, theta: float, phi: float) -> KrausChannel:
    """``exp(i delta n.sigma)`` with ``n`` at polar angle ``theta``, azimuth ``phi``."""
    if delta < 0:
        raise ChannelError("delta must be non-negative")
    n = _bloch(theta, phi)
    ns = n[0] * _SIGMA[1] + n[1] * _SIGMA[2] + n[2] * _SIGMA[3]
    u = np.cos(delta) * _SIGMA[0] + 1j * np.sin(delta) * ns
    return KrausChannel((u,), name=f"random_unitary({delta},{theta},{phi})")


def _psd_sqrt(r: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (r + r.conj().T))
    if w.min() < -1e-14:
        raise ChannelError("residual is not positive semidefinite")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def completed_channel(ops, omega: float, name: str = "") -> KrausChannel:
    """``E_j = sqrt(omega) ops_j`` plus ``E_0 = sqrt(1 - sum E_j^dag E_j)``."""
    scaled = [np.sqrt(omega) * np.asarray(k, dtype=complex) for k in ops]
    resid = np.eye(2) - sum(k.conj().T @ k for k in scaled)
    return KrausChannel(tuple([_psd_sqrt(resid)] + scaled), name=name)


def random_nonunitary(J: int, omega: float, rng, max_tries: int = 100) -> KrausChannel:
    """``J - 1`` Gaussian Kraus operators scaled by ``sqrt(omega)``, completed to TP."""
    if not 2 <= J <= 5:
        raise ChannelError("J must be between 2 and 5")
    if omega < 0:
        raise ChannelError("omega must be non-negative")
    for _ in range(max_tries):
        ops = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(J - 1)]
        try:
            return completed_channel(ops, omega, name=f"random_nonunitary(J={J},omega={omega})")
        except ChannelError:
            continue
    raise ChannelError(f"no positive residual after {max_tries} tries; reduce omega")


WORST_E1 = np.array(
    [[7.513196e-2 + 2.284803e-1j, -3.740817e-2 - 5.503615e-1j],
     [8.559614e-2 - 3.434704e-2j, -4.949497e-1 - 4.828740e-1j]]
)
WORST_E2 = np.array(
    [[8.930400e-4 + 2.591419e-1j, -1.370156e-1 + 4.818675e-1j],
     [7.107620e-2 + 9.455447e-2j, -1.669140e-1 + 4.662648e-2j]]
)


def worst_surface_channel(eps: float) -> KrausChannel:
    """Three-Kraus nonunitary family that was worst for the d=3 surface code."""
    return completed_channel([WORST_E1, WORST_E2], eps, name=f"worst_surface({eps})")


# ----------------------------------------------------------------------
# channel spec files

_NAMED = {
    "identity": lambda: identity_channel(),
    "depolarizing": lambda p: depolarizing(p),
    "amplitude_damping": lambda p: amplitude_damping(p),
    "z_rotation": lambda theta: z_rotation(theta),
    "random_unitary": lambda delta, theta, phi: random_unitary(delta, theta, phi),
    "worst_surface": lambda eps: worst_surface_channel(eps),
}


def channel_from_spec(spec: dict, rng=None) -> KrausChannel:
    """Build a channel from ``{"name": ..., params}`` or ``{"kraus": [...]}``.

    Explicit Kraus matrices are lists of 4 ``[re, im]`` pairs in row-major
    order.  ``{"name": "random_nonunitary", "J": .., "omega": ..}`` draws from
    ``rng``.
    """
    if "kraus" in spec:
        ops = []
        for flat in spec["kraus"]:
            vals = [complex(re, im) for re, im in flat]
            if len(vals) != 4:
                raise ChannelError("each Kraus matrix needs 4 [re, im] pairs")
            ops.append(np.array(vals).reshape(2, 2))
        return KrausChannel(tuple(ops), name=spec.get("name", "kraus"))
    params = {k: v for k, v in spec.items() if k != "name"}
    name = spec.get("name")
    if name == "random_nonunitary":
        if rng is None:
            rng = np.random.default_rng(params.pop("seed", None))
        else:
            params.pop("seed", None)
        return random_nonunitary(int(params["J"]), float(params["omega"]), rng)
    if name not in _NAMED:
        raise ChannelError(f"unknown channel {name!r}")
    try:
        return _NAMED[name](**params)
    except TypeError as exc:
        raise ChannelError(f"bad parameters for {name}: {exc}") from None


def channel_to_spec(ch: KrausChannel) -> dict:
    return {
        "name": ch.name or "kraus",
        "kraus": [[[float(v.real), float(v.imag)] for v in k.ravel()] for k in ch.kraus_ops],
    }


def load_channel(path, rng=None) -> KrausChannel:
    with open(path) as fh:
        return channel_from_spec(json.load(fh), rng)
