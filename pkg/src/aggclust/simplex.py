"""Dense two-phase simplex with Bland's anti-cycling rule.

Works on float tableaus (tolerance-based) or, with ``exact=True``, on
``fractions.Fraction`` entries stored in object arrays. Every optimum returned
is a basic feasible solution, i.e. a vertex of the feasible region, which the
polytope rounding relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

FEAS_TOL = 1e-7


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | Fraction | None
    iterations: int = 0


def _as(arr, exact, shape=None):
    if arr is None:
        return np.zeros(shape, dtype=object if exact else float)
    a = np.asarray(arr)
    if exact:
        out = np.empty(a.shape, dtype=object)
        for idx, v in np.ndenumerate(a):
            out[idx] = Fraction(v) if not isinstance(v, Fraction) else v
        return out
    return a.astype(float)


class _Tableau:
    def __init__(self, T, basis, exact, tol):
        self.T = T
        self.basis = basis
        self.exact = exact
        self.tol = 0 if exact else tol
        self.iterations = 0

    def pivot(self, r, c):
        T = self.T
        T[r] = T[r] / T[r, c]
        col = T[:, c].copy()
        col[r] = 0
        nz = np.nonzero(col != 0)[0]
        if len(nz):
            T[nz] -= np.outer(col[nz], T[r])
        if not self.exact:
            T[np.abs(T) < 1e-13] = 0.0
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed, max_iter):
        """Minimize the objective in the last row over columns in ``allowed``."""
        T = self.T
        m = T.shape[0] - 1
        tol = self.tol
        while True:
            if self.iterations > max_iter:
                raise LPError("simplex iteration limit reached")
            obj = T[m, :-1]
            enter = -1
            for j in allowed:  # Bland: lowest improving index
                if obj[j] < -tol:
                    enter = j
                    break
            if enter < 0:
                return "optimal"
            col = T[:m, enter]
            rows = np.nonzero(col > tol)[0]
            if len(rows) == 0:
                return "unbounded"
            ratios = [T[i, -1] / col[i] for i in rows]
            best = min(ratios)
            # Bland: among minimum ratios, the row whose basic variable is lowest
            leave = min((i for i, r in zip(rows, ratios) if r <= best + tol),
                        key=lambda i: self.basis[i])
            self.pivot(leave, enter)


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, upper=None, *,
            exact: bool = False, tol: float = 1e-9, max_iter: int = 200000) -> LPResult:
    """Minimize c.x subject to A_ub x <= b_ub, A_eq x = b_eq, 0 <= x <= upper.

    ``upper`` may contain ``inf`` (or ``None`` for all-unbounded).
    """
    c = _as(c, exact)
    n = len(c)
    A_ub = _as(A_ub, exact, (0, n)).reshape(-1, n)
    b_ub = _as(b_ub, exact, (0,)).reshape(-1)
    A_eq = _as(A_eq, exact, (0, n)).reshape(-1, n)
    b_eq = _as(b_eq, exact, (0,)).reshape(-1)
    if upper is not None:
        ub_idx = [j for j, u in enumerate(upper) if u is not None and u != np.inf]
        if ub_idx:
            rows = _as(np.zeros((len(ub_idx), n)), exact)
            for r, j in enumerate(ub_idx):
                rows[r, j] = 1
            A_ub = np.vstack([A_ub, rows])
            b_ub = np.concatenate([b_ub, _as([upper[j] for j in ub_idx], exact)])
    mu, me = len(b_ub), len(b_eq)
    m = mu + me
    # columns: x (n) | slack (mu) | artificial (m)
    ncol = n + mu + m
    T = _as(np.zeros((m + 1, ncol + 1)), exact)
    basis = [0] * m
    art_rows = []
    for i in range(mu):
        sign = -1 if b_ub[i] < 0 else 1
        T[i, :n] = A_ub[i] * sign
        T[i, n + i] = sign
        T[i, -1] = b_ub[i] * sign
        if sign > 0:
            basis[i] = n + i
        else:
            art_rows.append(i)
    for e in range(me):
        i = mu + e
        sign = -1 if b_eq[e] < 0 else 1
        T[i, :n] = A_eq[e] * sign
        T[i, -1] = b_eq[e] * sign
        art_rows.append(i)
    for i in art_rows:
        T[i, n + mu + i] = 1
        basis[i] = n + mu + i
    tab = _Tableau(T, basis, exact, tol)
    # phase 1: minimize the sum of artificials
    if art_rows:
        T[m, :] = 0
        for i in art_rows:
            T[m, :] -= T[i, :]
            T[m, n + mu + i] += 1
        tab.run(range(ncol), max_iter)
        scale = max(1.0, float(np.max(np.abs(T[:m, -1].astype(float)))) if m else 1.0)
        if -T[m, -1] > (0 if exact else FEAS_TOL * scale):
            return LPResult("infeasible", None, None, tab.iterations)
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= n + mu:
                cand = [j for j in range(n + mu) if abs(T[i, j]) > (0 if exact else 1e-9)]
                if cand:
                    tab.pivot(i, cand[0])
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([T[keep], T[m:m + 1]])
        tab.T = T
        tab.basis = basis = [basis[i] for i in keep]
        m = len(keep)
    # phase 2 on original plus slack columns
    T = np.hstack([T[:, :n + mu], T[:, -1:]])
    tab.T = T
    T[m, :] = 0
    T[m, :n] = c
    for i in range(m):
        cb = T[m, basis[i]]
        if cb != 0:
            T[m, :] -= cb * T[i, :]
    status = tab.run(range(n + mu), max_iter)
    if status == "unbounded":
        return LPResult("unbounded", None, None, tab.iterations)
    x = _as(np.zeros(n + mu), exact)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x = x[:n]
    value = -T[m, -1]
    if not exact:
        x = x.astype(float)
        x[np.abs(x) < 1e-12] = 0.0
        value = float(c @ x)
    return LPResult("optimal", x, value, tab.iterations)
