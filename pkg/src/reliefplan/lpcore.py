"""A small linear-programming layer with row duals for Benders cuts.

An LP has the form::

    min  c.x + offset + link_cost.v
    s.t. row_lo + L v <= A x <= row_hi + L v
         col_lo <= x <= col_hi

where ``v`` are *link values*, constants supplied by an earlier stage (for
example the previous inventory). Because ``v`` only shifts row bounds and the
objective constant, the derivative of the optimal value with respect to ``v``
is ``L.T @ row_duals + link_cost``, which is exactly a cut slope.

Two backends share the contract: HiGHS (default, via ``highspy``) and a
bundled dense revised simplex (``backend="simplex"``), kept as an
independent cross-check for small problems.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import highspy
import numpy as np
import scipy.sparse as sp

INF = np.inf


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """A solve that did not reach optimality, with context for the caller."""

    def __init__(self, status: LpStatus, context: str = ""):
        super().__init__(f"LP {status.value}" + (f" ({context})" if context else ""))
        self.status = status
        self.context = context


@dataclass(frozen=True, eq=False)
class StageLp:
    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    offset: float = 0.0
    link: sp.csr_matrix | None = None
    link_values: np.ndarray | None = None
    link_cost: np.ndarray | None = None
    col_blocks: dict = field(default_factory=dict)
    row_groups: dict = field(default_factory=dict)

    def __post_init__(self):
        m, n = self.A.shape
        for name, arr, size in (
            ("c", self.c, n), ("col_lo", self.col_lo, n), ("col_hi", self.col_hi, n),
            ("row_lo", self.row_lo, m), ("row_hi", self.row_hi, m),
        ):
            if np.shape(arr) != (size,):
                raise ValueError(f"{name} has shape {np.shape(arr)}, expected ({size},)")
        if self.link is not None:
            k = self.link.shape[1]
            if self.link.shape[0] != m:
                raise ValueError("link matrix must have one row per constraint")
            if self.link_values is None or np.shape(self.link_values) != (k,):
                raise ValueError(f"link values must have length {k}")
            if self.link_cost is not None and np.shape(self.link_cost) != (k,):
                raise ValueError(f"link cost must have length {k}")

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_links(self) -> int:
        return 0 if self.link is None else self.link.shape[1]

    def shifted_row_bounds(self, values=None) -> tuple[np.ndarray, np.ndarray]:
        if self.link is None:
            return self.row_lo, self.row_hi
        v = self.link_values if values is None else values
        shift = self.link @ v
        return self.row_lo + shift, self.row_hi + shift

    def constant(self, values=None) -> float:
        if self.link_cost is None:
            return float(self.offset)
        v = self.link_values if values is None else values
        return float(self.offset + self.link_cost @ v)


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    objective: float
    x: np.ndarray | None = None
    row_duals: np.ndarray | None = None
    col_duals: np.ndarray | None = None
    link_slope: np.ndarray | None = None
    col_blocks: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def block(self, name: str) -> np.ndarray:
        return self.x[self.col_blocks[name]]


def fix_link(lp: StageLp, values) -> StageLp:
    """Copy of ``lp`` with its link values replaced."""
    v = np.asarray(values, dtype=float)
    if v.shape != (lp.n_links,):
        raise ValueError(f"expected {lp.n_links} link values, got shape {v.shape}")
    return replace(lp, link_values=v)


def _slope(lp: StageLp, row_duals: np.ndarray) -> np.ndarray | None:
    if lp.link is None:
        return None
    g = lp.link.T @ row_duals
    if lp.link_cost is not None:
        g = g + lp.link_cost
    return np.asarray(g, dtype=float)


def solve(lp: StageLp, backend: str = "highs") -> LpSolution:
    if backend == "highs":
        return WarmLp(lp).solve()
    if backend == "simplex":
        from .simplex import solve_dense

        lo, hi = lp.shifted_row_bounds()
        res = solve_dense(lp.c, lp.A.toarray(), lo, hi, lp.col_lo, lp.col_hi)
        if res.status is not LpStatus.OPTIMAL:
            return LpSolution(res.status, np.nan, col_blocks=lp.col_blocks)
        return LpSolution(
            LpStatus.OPTIMAL,
            res.objective + lp.constant(),
            res.x,
            res.row_duals,
            res.col_duals,
            _slope(lp, res.row_duals),
            lp.col_blocks,
        )
    raise ValueError(f"unknown backend {backend!r}")


_STATUS = {
    highspy.HighsModelStatus.kOptimal: LpStatus.OPTIMAL,
    highspy.HighsModelStatus.kInfeasible: LpStatus.INFEASIBLE,
    highspy.HighsModelStatus.kUnbounded: LpStatus.UNBOUNDED,
    highspy.HighsModelStatus.kUnboundedOrInfeasible: LpStatus.UNBOUNDED,
}


class WarmLp:
    """A HiGHS model kept alive between solves so the basis is reused.

    Supports the mutations the decomposition algorithms need: new link
    values, new row bounds, new costs, and appended rows (cuts).
    """

    def __init__(self, lp: StageLp):
        self.lp = lp
        self._lo0 = np.array(lp.row_lo, dtype=float)
        self._hi0 = np.array(lp.row_hi, dtype=float)
        # dense copies: the link block is tiny and dense products are much cheaper
        self._link = lp.link.toarray() if lp.link is not None else None
        self._link_rows = (
            np.nonzero(np.any(self._link != 0, axis=1))[0].astype(np.int32) if self._link is not None
            else np.empty(0, np.int32)
        )
        self._link_sub = self._link[self._link_rows] if self._link is not None else None
        self._link_t = np.ascontiguousarray(self._link.T) if self._link is not None else None
        self._m = lp.n_rows
        self._values = None if lp.link_values is None else np.array(lp.link_values, dtype=float)
        self._c = np.array(lp.c, dtype=float)
        self._offset = float(lp.offset)
        self._extra_rows = 0
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("solver", "simplex")
        model = highspy.HighsLp()
        m, n = lp.A.shape
        A = lp.A.tocsc()
        model.num_col_ = n
        model.num_row_ = m
        model.col_cost_ = self._c
        model.col_lower_ = np.asarray(lp.col_lo, dtype=float)
        model.col_upper_ = np.asarray(lp.col_hi, dtype=float)
        lo, hi = lp.shifted_row_bounds()
        model.row_lower_ = np.asarray(lo, dtype=float)
        model.row_upper_ = np.asarray(hi, dtype=float)
        model.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        model.a_matrix_.start_ = A.indptr.astype(np.int32)
        model.a_matrix_.index_ = A.indices.astype(np.int32)
        model.a_matrix_.value_ = A.data.astype(float)
        model.a_matrix_.num_col_ = n
        model.a_matrix_.num_row_ = m
        h.passModel(model)
        self.h = h

    @property
    def n_rows(self) -> int:
        return self.lp.n_rows + self._extra_rows

    def fix_link(self, values) -> None:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.lp.n_links,):
            raise ValueError(f"expected {self.lp.n_links} link values, got shape {v.shape}")
        self._values = v
        if len(self._link_rows):
            shift = self._link_sub @ v
            self.h.changeRowsBounds(
                len(self._link_rows),
                self._link_rows,
                self._lo0[self._link_rows] + shift,
                self._hi0[self._link_rows] + shift,
            )

    def set_row_bounds(self, rows, lo, hi) -> None:
        """Set base bounds of original rows; link shifts are reapplied."""
        rows = np.asarray(rows, dtype=np.int32)
        self._lo0[rows] = lo
        self._hi0[rows] = hi
        lo, hi = self._lo0[rows], self._hi0[rows]
        if self._link is not None and self._values is not None:
            shift = self._link[rows] @ self._values
            lo, hi = lo + shift, hi + shift
        self.h.changeRowsBounds(len(rows), rows, lo, hi)

    def set_costs(self, cols, costs) -> None:
        cols = np.asarray(cols, dtype=np.int64)
        costs = np.broadcast_to(np.asarray(costs, dtype=float), cols.shape)
        self._c[cols] = costs
        self.h.changeColsCost(len(cols), cols.astype(np.int32), np.ascontiguousarray(costs))

    def set_offset(self, offset: float) -> None:
        self._offset = float(offset)

    def add_rows(self, coefs, lo, hi) -> None:
        """Append dense rows (each of length n_cols); they carry no link terms."""
        M = np.atleast_2d(np.asarray(coefs, dtype=float))
        S = sp.csr_matrix(M)
        k = M.shape[0]
        self.h.addRows(
            k,
            np.broadcast_to(np.asarray(lo, dtype=float), (k,)).copy(),
            np.broadcast_to(np.asarray(hi, dtype=float), (k,)).copy(),
            S.nnz,
            S.indptr[:-1].astype(np.int32),
            S.indices.astype(np.int32),
            S.data,
        )
        self._extra_rows += k

    def solve(self, context: str = "", cold: bool = False) -> LpSolution:
        """Solve from the stored basis, or from scratch when ``cold``.

        Cold solves make the returned vertex independent of the solve
        history, which keeps simulation results bit-reproducible.
        """
        h = self.h
        if cold:
            h.clearSolver()
        h.run()
        status = _STATUS.get(h.getModelStatus())
        if status is None:
            # a stale basis occasionally trips the simplex; retry from scratch once
            h.clearSolver()
            h.run()
            status = _STATUS.get(h.getModelStatus())
            if status is None:
                raise LpError(LpStatus.INFEASIBLE, f"solver status {h.getModelStatus()} {context}".strip())
        if status is not LpStatus.OPTIMAL:
            return LpSolution(status, np.nan, col_blocks=self.lp.col_blocks)
        sol = h.getSolution()
        x = np.array(sol.col_value)
        y = np.array(sol.row_dual)
        const = self._offset
        if self.lp.link_cost is not None:
            const += float(self.lp.link_cost @ self._values)
        obj = float(h.getInfo().objective_function_value) + const
        slope = None
        if self._link_t is not None:
            slope = self._link_t @ y[: self._m]
            if self.lp.link_cost is not None:
                slope = slope + self.lp.link_cost
        return LpSolution(LpStatus.OPTIMAL, obj, x, y, np.array(sol.col_dual), slope, self.lp.col_blocks)


class LpBuilder:
    """Incremental construction of a :class:`StageLp` from sparse triplets."""

    def __init__(self, n_links: int = 0):
        self._c, self._lo, self._hi = [], [], []
        self._cost_adds = []
        self._rows, self._cols, self._vals = [], [], []
        self._rlo, self._rhi = [], []
        self._lr, self._lk, self._lv = [], [], []
        self.n_cols = 0
        self.n_rows = 0
        self.n_links = n_links
        self.offset = 0.0
        self.col_blocks: dict = {}
        self.row_groups: dict = {}

    def add_vars(self, n: int, lo=0.0, hi=INF, cost=0.0, name: str | None = None) -> np.ndarray:
        idx = np.arange(self.n_cols, self.n_cols + n)
        self._c.append(np.broadcast_to(np.asarray(cost, dtype=float), (n,)))
        self._lo.append(np.broadcast_to(np.asarray(lo, dtype=float), (n,)))
        self._hi.append(np.broadcast_to(np.asarray(hi, dtype=float), (n,)))
        self.n_cols += n
        if name is not None:
            self.col_blocks[name] = slice(idx[0], idx[-1] + 1) if n else slice(0, 0)
        return idx

    def add_cost(self, cols, cost) -> None:
        """Add to the objective coefficients of existing columns."""
        self._cost_adds.append((np.asarray(cols), np.broadcast_to(np.asarray(cost, dtype=float), np.shape(cols))))

    def add_rows(self, n: int, lo=-INF, hi=INF, name: str | None = None) -> np.ndarray:
        idx = np.arange(self.n_rows, self.n_rows + n)
        self._rlo.append(np.broadcast_to(np.asarray(lo, dtype=float), (n,)))
        self._rhi.append(np.broadcast_to(np.asarray(hi, dtype=float), (n,)))
        self.n_rows += n
        if name is not None:
            self.row_groups[name] = slice(idx[0], idx[-1] + 1) if n else slice(0, 0)
        return idx

    def coef(self, rows, cols, vals) -> None:
        r, c = np.broadcast_arrays(np.asarray(rows), np.asarray(cols))
        self._rows.append(r.ravel())
        self._cols.append(c.ravel())
        self._vals.append(np.broadcast_to(np.asarray(vals, dtype=float), r.shape).ravel())

    def link_coef(self, rows, links, vals) -> None:
        r, k = np.broadcast_arrays(np.asarray(rows), np.asarray(links))
        self._lr.append(r.ravel())
        self._lk.append(k.ravel())
        self._lv.append(np.broadcast_to(np.asarray(vals, dtype=float), r.shape).ravel())

    def build(self, link_values=None, link_cost=None) -> StageLp:
        def cat(parts):
            return np.concatenate(parts) if parts else np.empty(0)

        c = cat(self._c).astype(float)
        for cols, cost in self._cost_adds:
            np.add.at(c, cols, cost)
        A = sp.csr_matrix(
            (cat(self._vals), (cat(self._rows).astype(int), cat(self._cols).astype(int))),
            shape=(self.n_rows, self.n_cols),
        )
        A.sum_duplicates()
        link = None
        lv = lc = None
        if self.n_links:
            link = sp.csr_matrix(
                (cat(self._lv), (cat(self._lr).astype(int), cat(self._lk).astype(int))),
                shape=(self.n_rows, self.n_links),
            )
            lv = np.zeros(self.n_links) if link_values is None else np.asarray(link_values, dtype=float)
            lc = None if link_cost is None else np.asarray(link_cost, dtype=float)
        return StageLp(
            c, A, cat(self._rlo).astype(float), cat(self._rhi).astype(float),
            cat(self._lo).astype(float), cat(self._hi).astype(float),
            self.offset, link, lv, lc, dict(self.col_blocks), dict(self.row_groups),
        )
