"""Dense two-phase revised simplex with Bland's rule.

Meant for small LPs (a few hundred columns). It is slow compared with
HiGHS but has no external dependency beyond numpy, always terminates
(Bland's rule rules out cycling) and returns row duals with the same sign
convention as :mod:`reliefplan.lpcore`: ``row_duals[i]`` is the derivative
of the optimal value with respect to a shift of row ``i``'s bounds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lpcore import LpStatus

TOL = 1e-9


@dataclass
class DenseResult:
    status: LpStatus
    objective: float = np.nan
    x: np.ndarray | None = None
    row_duals: np.ndarray | None = None
    col_duals: np.ndarray | None = None
    iterations: int = 0


class _Tableau:
    """Equality-form problem ``A x = b, x >= 0`` with ``b >= 0``."""

    def __init__(self, A, b):
        self.A = A
        self.b = b
        self.m, self.n = A.shape

    def run(self, cost, basis, allowed, max_iter):
        """Bland's-rule primal simplex from a feasible ``basis``; mutates it."""
        A, b = self.A, self.b
        it = 0
        while True:
            B = A[:, basis]
            xB = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, cost[basis])
            d = cost - A.T @ y
            in_basis = np.zeros(self.n, bool)
            in_basis[basis] = True
            cand = np.nonzero(allowed & ~in_basis & (d < -TOL))[0]
            if len(cand) == 0:
                return "optimal", xB, y, it
            j = int(cand[0])
            u = np.linalg.solve(B, A[:, j])
            pos = u > TOL
            if not pos.any():
                return "unbounded", xB, y, it
            ratios = np.full(self.m, np.inf)
            ratios[pos] = np.maximum(xB[pos], 0.0) / u[pos]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + TOL * max(1.0, abs(best)))[0]
            leave = min(ties, key=lambda r: basis[r])
            basis[leave] = j
            it += 1
            if it > max_iter:
                raise RuntimeError("simplex iteration limit reached")


def solve_dense(c, A, row_lo, row_hi, col_lo, col_hi, max_iter: int = 100_000) -> DenseResult:
    """Solve ``min c.x  s.t. row_lo <= A x <= row_hi, col_lo <= x <= col_hi``."""
    c = np.asarray(c, float)
    A = np.asarray(A, float).reshape(-1, len(c))
    m0, n0 = A.shape

    # column substitution x = shift + Tmap @ z with z >= 0
    shift = np.zeros(n0)
    tcols = []  # (orig col, sign)
    bound_rows = []  # (std column index, width)
    for j in range(n0):
        lo, hi = col_lo[j], col_hi[j]
        if np.isfinite(lo):
            shift[j] = lo
            tcols.append((j, 1.0))
            if np.isfinite(hi):
                if hi < lo - TOL:
                    return DenseResult(LpStatus.INFEASIBLE)
                bound_rows.append((len(tcols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            tcols.append((j, -1.0))
        else:
            tcols.append((j, 1.0))
            tcols.append((j, -1.0))
    nz = len(tcols)
    Tmap = np.zeros((n0, nz))
    for k, (j, s) in enumerate(tcols):
        Tmap[j, k] = s
    Az = A @ Tmap
    base = A @ shift

    # rows as (coefficients, sense, rhs, origin row or -1)
    rows = []
    for i in range(m0):
        lo, hi = row_lo[i] - base[i], row_hi[i] - base[i]
        if np.isfinite(lo) and np.isfinite(hi) and abs(hi - lo) <= TOL * max(1.0, abs(lo)):
            rows.append((Az[i], 0, lo, i))
            continue
        if np.isfinite(lo):
            rows.append((Az[i], -1, lo, i))
        if np.isfinite(hi):
            rows.append((Az[i], 1, hi, i))
    for k, w in bound_rows:
        e = np.zeros(nz)
        e[k] = 1.0
        rows.append((e, 1, w, -1))

    m = len(rows)
    n_slack = sum(1 for r in rows if r[1] != 0)
    n = nz + n_slack
    Astd = np.zeros((m, n))
    bstd = np.zeros(m)
    flip = np.ones(m)
    s = nz
    for k, (a, sense, rhs, _) in enumerate(rows):
        Astd[k, :nz] = a
        if sense != 0:
            Astd[k, s] = 1.0 if sense > 0 else -1.0
            s += 1
        bstd[k] = rhs
        if rhs < 0:
            Astd[k] *= -1.0
            bstd[k] *= -1.0
            flip[k] = -1.0
    cstd = np.zeros(n)
    cstd[:nz] = Tmap.T @ c

    # phase 1 with one artificial per row
    A1 = np.hstack([Astd, np.eye(m)])
    tab = _Tableau(A1, bstd)
    basis = list(range(n, n + m))
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    allowed = np.ones(n + m, bool)
    _, xB, _, it1 = tab.run(c1, basis, allowed, max_iter)
    if xB @ c1[basis] > 1e-7 * max(1.0, np.abs(bstd).max(initial=0.0)):
        return DenseResult(LpStatus.INFEASIBLE, iterations=it1)

    # pivot zero-level artificials out; a row where that fails is redundant
    keep = np.ones(m, bool)
    for r in range(m):
        if basis[r] < n:
            continue
        B = A1[:, basis]
        row_r = np.linalg.solve(B.T, np.eye(m)[r])  # r-th row of B^-1
        alpha = row_r @ Astd
        alpha[[b for b in basis if b < n]] = 0.0
        piv = np.nonzero(np.abs(alpha) > 1e-7)[0]
        if len(piv):
            basis[r] = int(piv[0])
        else:
            keep[r] = False
    rows_kept = np.nonzero(keep)[0]
    basis2 = [basis[r] for r in rows_kept]
    tab2 = _Tableau(Astd[rows_kept], bstd[rows_kept])
    status, xB, y, it2 = tab2.run(cstd, basis2, np.ones(n, bool), max_iter)
    if status == "unbounded":
        return DenseResult(LpStatus.UNBOUNDED, iterations=it1 + it2)

    z = np.zeros(n)
    z[basis2] = xB
    x = shift + Tmap @ z[:nz]
    ystd = np.zeros(m)
    ystd[rows_kept] = y
    duals = np.zeros(m0)
    for k, (_, _, _, origin) in enumerate(rows):
        if origin >= 0:
            duals[origin] += flip[k] * ystd[k]
    return DenseResult(
        LpStatus.OPTIMAL,
        float(c @ x),
        x,
        duals,
        c - A.T @ duals,
        it1 + it2,
    )
