"""Small dense two-phase simplex with Bland's rule.

Solves ``min c.x  s.t.  A x = b, x >= 0``.  Intended for the tiny L1
decomposition problems of this package (tens of variables, about a dozen
rows), where a deterministic pivot order matters more than speed.
"""

from __future__ import annotations

import numpy as np


class LPError(RuntimeError):
    pass


class LPResult:
    __slots__ = ("x", "fun", "status", "iterations")

    def __init__(self, x, fun, status, iterations):
        self.x = x
        self.fun = fun
        self.status = status
        self.iterations = iterations

    def __repr__(self):
        return f"LPResult(fun={self.fun!r}, status={self.status!r}, iterations={self.iterations})"


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and tab[i, col] != 0.0:
            tab[i] -= tab[i, col] * tab[row]


def _run(tab, basis, ncols, tol, max_iter):
    """Iterate on ``tab`` whose last row holds reduced costs (minimization).

    Only columns ``< ncols`` may enter.  Returns the iteration count.
    """
    m = tab.shape[0] - 1
    it = 0
    while True:
        cost = tab[-1, :ncols]
        entering = next((j for j in range(ncols) if cost[j] < -tol), None)
        if entering is None:
            return it
        col = tab[:m, entering]
        best = None
        leave = None
        for i in range(m):
            if col[i] > tol:
                ratio = tab[i, -1] / col[i]
                # Bland: ties go to the smallest basic index
                if best is None or ratio < best - tol or (abs(ratio - best) <= tol and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave is None:
            raise LPError("problem is unbounded")
        _pivot(tab, leave, entering)
        basis[leave] = entering
        it += 1
        if it > max_iter:
            raise LPError("simplex iteration limit reached")


def simplex(c, a_eq, b_eq, tol: float = 1e-11, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    a = np.array(a_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = a.shape
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1

    # phase 1: artificial columns n..n+m-1
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -a.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    it = _run(tab, basis, n + m, tol, max_iter)
    if -tab[-1, -1] > 1e-9 * max(1.0, b.sum()):
        raise LPError("problem is infeasible")

    # drive remaining artificials out of the basis, dropping redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= n:
            col = next((j for j in range(n) if abs(tab[i, j]) > 1e-9), None)
            if col is None:
                continue
            _pivot(tab, i, col)
            basis[i] = col
        keep.append(i)
    tab = np.vstack([tab[keep][:, list(range(n)) + [-1]], np.zeros((1, n + 1))])
    basis = [basis[i] for i in keep]

    # phase 2
    tab[-1, :n] = c
    for i, j in enumerate(basis):
        if tab[-1, j] != 0.0:
            tab[-1] -= tab[-1, j] * tab[i]
    it += _run(tab, basis, n, tol, max_iter)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = tab[i, -1]
    x[x < 0] = 0.0
    return LPResult(x, float(c @ x), "optimal", it)


def l1_minimize(a_eq, b_eq, prefer=None, tol: float = 1e-11) -> np.ndarray:
    """Minimize ``sum |q|`` subject to ``A q = b``.

    Uses the sign split ``q = u - v``.  If ``prefer`` (a column index) is
    given, ties among L1 optima are broken by maximizing ``q[prefer]``.
    """
    a = np.asarray(a_eq, dtype=float)
    m, n = a.shape
    split = np.hstack([a, -a])
    cost = np.ones(2 * n)
    first = simplex(cost, split, b_eq, tol=tol)
    if prefer is None:
        x = first.x
    else:
        # keep the L1 norm at its optimum (a tiny slack absorbs rounding)
        a2 = np.zeros((m + 1, 2 * n + 1))
        a2[:m, :2 * n] = split
        a2[m, :2 * n] = cost
        a2[m, -1] = 1.0
        b2 = np.append(np.asarray(b_eq, dtype=float), first.fun * (1 + 1e-12) + 1e-13)
        c2 = np.zeros(2 * n + 1)
        c2[prefer] = -1.0
        c2[n + prefer] = 1.0
        try:
            x = simplex(c2, a2, b2, tol=tol).x[:2 * n]
        except LPError:
            x = first.x
    return x[:n] - x[n:]
