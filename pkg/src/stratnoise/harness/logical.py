"""Logical-channel readout through a noiseless reference qubit.

The logical qubit starts Bell-paired with a reference qubit ``R``.  After the
protocol the twelve expectations ``<sigma_j(R) sigma_i(L)>`` (``i`` in X, Y, Z;
``j`` in I, X, Y, Z) give the logical Pauli transfer matrix,
``m[i][j] = s_j <sigma_j(R) sigma_i(L)>`` with ``s_Y = -1`` (``Y^T = -Y``), so a
single sample carries the whole logical map.  Fidelities of any input state
follow by linearity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channels import worst_case_point
from ..pauli import PauliString

AXES = "IXYZ"
TRANSPOSE_SIGN = np.array([1.0, 1.0, -1.0, 1.0])
# the six Pauli eigenstates as (label, Bloch vector)
STATES = (("+Z", (0, 0, 1)), ("-Z", (0, 0, -1)), ("+X", (1, 0, 0)),
          ("-X", (-1, 0, 0)), ("+Y", (0, 1, 0)), ("-Y", (0, -1, 0)))
BLOCH = np.array([b for _, b in STATES], dtype=float)


def logical_paulis(xbar: PauliString, zbar: PauliString) -> dict:
    """``{I, X, Y, Z}`` logical operators with ``Y = i X Z``."""
    n = xbar.n
    y = xbar * zbar
    y = PauliString(n, y.x, y.z, y.phase + 1)
    return {"I": PauliString(n), "X": xbar, "Y": y, "Z": zbar}


def choi_observables(ref: int, xbar: PauliString, zbar: PauliString) -> list:
    """The twelve readout observables, ordered ``4 (i - 1) + j``."""
    n = xbar.n
    L = logical_paulis(xbar, zbar)
    out = []
    for i in "XYZ":
        for j in AXES:
            r = PauliString(n) if j == "I" else PauliString.single(n, ref, j)
            out.append(r * L[i])
    return out


def bell_generators(ref: int, xbar: PauliString, zbar: PauliString) -> list:
    n = xbar.n
    return [PauliString.single(n, ref, "X") * xbar, PauliString.single(n, ref, "Z") * zbar]


def state_generator(label: str, xbar: PauliString, zbar: PauliString) -> PauliString:
    """Signed logical Pauli stabilizing the logical eigenstate ``label``."""
    p = logical_paulis(xbar, zbar)[label[1]]
    return p if label[0] == "+" else -p


def ptm_from_readout(f) -> np.ndarray:
    f = np.asarray(f, dtype=float).reshape(3, 4)
    m = np.zeros((4, 4))
    m[0, 0] = 1.0
    m[1:, :] = f * TRANSPOSE_SIGN
    return m


def readout_from_ptm(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return (m[1:, :] * TRANSPOSE_SIGN).ravel()


def ideal_readout() -> np.ndarray:
    return readout_from_ptm(np.eye(4))


def average_fidelity_weights():
    """``F_avg = offset + w . f`` over the six Pauli eigenstates."""
    w = np.zeros(12)
    for i in range(3):
        w[4 * i + i + 1] = TRANSPOSE_SIGN[i + 1] / 6.0
    return w, 0.5


def state_fidelity_weights(label_out: str, label_in: str):
    """``F(out, in) = Tr(rho_out E(rho_in)) = offset + w . f``."""
    b_out = np.array(dict(STATES)[label_out], dtype=float)
    b_in = np.array(dict(STATES)[label_in], dtype=float)
    v = np.concatenate([[1.0], b_in])
    # (1 + b_out . (m[1:] v)) / 2
    w = np.outer(b_out, v) * TRANSPOSE_SIGN / 2.0
    return w.ravel(), 0.5


@dataclass
class LogicalFidelityMatrix:
    """``F[i, j] = Tr(rho_i E(rho_j))`` over the six eigenstates, with error bars."""

    F: np.ndarray
    std: np.ndarray

    @classmethod
    def from_readout(cls, f, cov=None) -> "LogicalFidelityMatrix":
        f = np.asarray(f, dtype=float)
        F = np.zeros((6, 6))
        S = np.zeros((6, 6))
        for a, (lo, _) in enumerate(STATES):
            for b, (li, _) in enumerate(STATES):
                w, c = state_fidelity_weights(lo, li)
                F[a, b] = c + w @ f
                if cov is not None:
                    S[a, b] = np.sqrt(max(w @ cov @ w, 0.0))
        return cls(F, S)

    @classmethod
    def from_ptm(cls, m) -> "LogicalFidelityMatrix":
        return cls.from_readout(readout_from_ptm(m))

    def ptm(self) -> np.ndarray:
        """Logical map from the inputs ``|0>, |1>, |+>, |+i>``."""
        F = self.F

        def out_bloch(j):
            # Bloch vector of E(rho_j) from the fidelities with the six outputs
            return np.array([F[2, j] - F[3, j], F[4, j] - F[5, j], F[0, j] - F[1, j]])

        o0, o1, ox, oy = out_bloch(0), out_bloch(1), out_bloch(2), out_bloch(4)
        t = (o0 + o1) / 2
        m = np.zeros((4, 4))
        m[0, 0] = 1.0
        m[1:, 0] = t
        m[1:, 3] = (o0 - o1) / 2
        m[1:, 1] = ox - t
        m[1:, 2] = oy - t
        return m

    def consistency(self) -> float:
        """Largest mismatch of the unused inputs ``|->, |-i>`` with the reconstruction."""
        rec = LogicalFidelityMatrix.from_ptm(self.ptm()).F
        return float(np.max(np.abs(rec - self.F)))

    def is_physical(self, n_sigma: float = 3.0) -> bool:
        """Trace preservation (each column's output fidelities pair to 1) within error bars."""
        pairs = self.F[0::2] + self.F[1::2]
        err = np.sqrt(self.std[0::2] ** 2 + self.std[1::2] ** 2)
        return bool(np.all(np.abs(pairs - 1) <= n_sigma * err + 1e-9))


def worst_case_logical_fidelity(m, grid: int = 20_000) -> float:
    """Minimum of ``Tr(rho E(rho))`` over pure logical states."""
    ptm = m.ptm() if isinstance(m, LogicalFidelityMatrix) else np.asarray(m, dtype=float)
    infid, _ = worst_case_point(ptm, grid)
    return float(1.0 - max(infid, 0.0))


@dataclass
class LogicalSummary:
    worst_fidelity: float
    worst_std: float
    average_fidelity: float
    average_std: float
    ptm: np.ndarray
    worst_state: np.ndarray

    @property
    def worst_infidelity(self) -> float:
        return 1.0 - self.worst_fidelity

    @property
    def average_infidelity(self) -> float:
        return 1.0 - self.average_fidelity

    def to_dict(self) -> dict:
        return {"worst_infidelity": self.worst_infidelity, "worst_std": self.worst_std,
                "average_infidelity": self.average_infidelity, "average_std": self.average_std,
                "ptm": self.ptm.tolist(), "worst_state": self.worst_state.tolist()}


def summarize(f, cov=None, grid: int = 20_000) -> LogicalSummary:
    """Worst-case and average logical fidelity of a readout estimate.

    The worst-case error bar uses the gradient at the optimum (envelope
    theorem): ``d infid / d t = -n/2`` and ``d infid / d T = -n n^T / 2``.
    """
    f = np.asarray(f, dtype=float)
    m = ptm_from_readout(f)
    infid, n = worst_case_point(m, grid)
    infid = max(infid, 0.0)
    wa, ca = average_fidelity_weights()
    avg = ca + wa @ f
    if cov is None:
        return LogicalSummary(1 - infid, 0.0, float(avg), 0.0, m, n)
    g = np.zeros((4, 4))
    g[1:, 0] = -n / 2
    g[1:, 1:] = -np.outer(n, n) / 2
    gw = readout_from_ptm(g)  # same linear map as the readout ordering
    std_w = float(np.sqrt(max(gw @ cov @ gw, 0.0)))
    std_a = float(np.sqrt(max(wa @ cov @ wa, 0.0)))
    return LogicalSummary(1 - infid, std_w, float(avg), std_a, m, n)
