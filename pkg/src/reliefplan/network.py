"""Building blocks shared by every LP formulation of the relief network.

A *period block* holds one period's inventories ``x`` (per SP) and flows
``f`` (per arc), optionally with deliveries ``y`` (SP x DP), salvage
``over`` (per SP) and shortage ``under`` (per DP). How the previous
inventory enters the period's rows is described by :class:`Prev`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import MDC, Instance
from .lpcore import INF, LpBuilder


@dataclass(frozen=True)
class Prev:
    """Previous-period inventory: a constant vector, LP columns, or link values."""

    kind: str  # "const" | "cols" | "link"
    ref: np.ndarray

    @staticmethod
    def const(x) -> "Prev":
        return Prev("const", np.asarray(x, dtype=float))

    @staticmethod
    def cols(idx) -> "Prev":
        return Prev("cols", np.asarray(idx))

    @staticmethod
    def link(idx) -> "Prev":
        return Prev("link", np.asarray(idx))


@dataclass
class PeriodVars:
    t: int
    x: np.ndarray
    f: np.ndarray
    y: np.ndarray | None = None  # (I, J) column indices
    over: np.ndarray | None = None
    under: np.ndarray | None = None
    balance: np.ndarray | None = None
    outcap: np.ndarray | None = None
    demand: np.ndarray | None = None
    supply: np.ndarray | None = None


@dataclass(frozen=True)
class ArcIncidence:
    """Arc k enters SP ``dst[k]`` and, unless it starts at the MDC, leaves ``src[k]``."""

    src: np.ndarray
    dst: np.ndarray
    inter: np.ndarray  # arcs leaving an SP (bounded by prior inventory)
    net: np.ndarray  # (I, A) inflow minus outflow
    out: np.ndarray  # (I, A) outflow

    @staticmethod
    def of(inst: Instance) -> "ArcIncidence":
        hit = inst.memo.get("incidence")
        if hit is None:
            hit = inst.memo["incidence"] = ArcIncidence._build(inst)
        return hit

    @staticmethod
    def _build(inst: Instance) -> "ArcIncidence":
        src = np.array([s for s, _ in inst.arcs])
        dst = np.array([d for _, d in inst.arcs])
        inter = np.nonzero(src != MDC)[0]
        I, nA = inst.n_sp, len(src)
        out = np.zeros((I, nA))
        out[src[inter], inter] = 1.0
        net = -out.copy()
        net[dst, np.arange(nA)] += 1.0
        return ArcIncidence(src, dst, inter, net, out)


def logistics_cost(inst: Instance, t: int, x: np.ndarray, f: np.ndarray) -> float:
    """Rerouting, holding and procurement cost of one period's (x, f)."""
    return float(inst.arc_costs(t) @ f + inst.costs.holding * np.sum(x))


def _prev_rhs(prev: Prev, n: int) -> np.ndarray:
    return prev.ref if prev.kind == "const" else np.zeros(n)


def _prev_coefs(b: LpBuilder, rows: np.ndarray, prev: Prev) -> None:
    """Move ``x_prev`` to the right-hand side of ``rows`` when it is not constant."""
    if prev.kind == "cols":
        b.coef(rows, prev.ref, -1.0)
    elif prev.kind == "link":
        b.link_coef(rows, prev.ref, 1.0)
    elif prev.kind != "const":
        raise ValueError(f"unknown inventory source {prev.kind!r}")


def add_period(
    b: LpBuilder,
    inst: Instance,
    t: int,
    prev: Prev,
    *,
    weight: float = 1.0,
    deliveries: bool = False,
    demand: np.ndarray | None = None,
    cost_active: bool = True,
    tag: str = "",
) -> PeriodVars:
    """Add one period's variables and rows.

    With ``deliveries`` the period carries delivery, salvage and shortage
    variables: the balance row is ``x_t - in + out + sum_j y + over = x_prev``
    and demand rows ``sum_i y + under >= d``. Costs are multiplied by
    ``weight``; with ``cost_active=False`` the delivery/salvage/shortage
    costs are zero (used for periods after absorption).
    """
    I, J = inst.n_sp, inst.n_dp
    inc = ArcIncidence.of(inst)
    nA = len(inst.arcs)
    x = b.add_vars(I, 0.0, inst.network.capacity, weight * inst.costs.holding, name=f"x{tag}")
    f = b.add_vars(nA, 0.0, INF, weight * inst.arc_costs(t), name=f"f{tag}")
    pv = PeriodVars(t, x, f)

    rhs = _prev_rhs(prev, I)
    bal = b.add_rows(I, rhs, rhs, name=f"balance{tag}")
    b.coef(bal, x, 1.0)
    b.coef(bal[inc.dst], f, -1.0)
    b.coef(bal[inc.src[inc.inter]], f[inc.inter], 1.0)
    _prev_coefs(b, bal, prev)

    if deliveries:
        c_act = weight if cost_active else 0.0
        y = b.add_vars(I * J, 0.0, INF, (c_act * inst.delivery_costs(t)).ravel(), name=f"y{tag}").reshape(I, J)
        over = b.add_vars(I, 0.0, INF, c_act * inst.costs.salvage, name=f"over{tag}")
        under = b.add_vars(J, 0.0, INF, c_act * inst.costs.penalty, name=f"under{tag}")
        b.coef(bal[:, None], y, 1.0)
        b.coef(bal, over, 1.0)
        d = np.zeros(J) if demand is None else np.asarray(demand, dtype=float)
        dem = b.add_rows(J, d, INF, name=f"demand{tag}")
        b.coef(dem[None, :], y, 1.0)
        b.coef(dem, under, 1.0)
        pv.y, pv.over, pv.under, pv.demand = y, over, under, dem
    pv.balance = bal

    out = b.add_rows(I, -INF, rhs, name=f"outcap{tag}")
    b.coef(out[inc.src[inc.inter]], f[inc.inter], 1.0)
    _prev_coefs(b, out, prev)
    pv.outcap = out
    return pv


def add_terminal_delivery(
    b: LpBuilder, inst: Instance, pv: PeriodVars, demand: np.ndarray, *, weight: float = 1.0, tag: str = ""
) -> PeriodVars:
    """Landfall-period deliveries from the ending inventory ``x_T``.

    Objective ``c^a y + p (d - sum y) + q (x_T - sum y)`` is entered as
    coefficients on ``y`` and ``x_T`` plus the constant ``p * sum d``.
    """
    I, J = inst.n_sp, inst.n_dp
    p, q = inst.costs.penalty, inst.costs.salvage
    d = np.asarray(demand, dtype=float)
    ca = inst.delivery_costs(pv.t)
    y = b.add_vars(I * J, 0.0, INF, (weight * (ca - p - q)).ravel(), name=f"y{tag}").reshape(I, J)
    b.add_cost(pv.x, weight * q)
    sup = b.add_rows(I, -INF, 0.0, name=f"supply{tag}")
    b.coef(sup[:, None], y, 1.0)
    b.coef(sup, pv.x, -1.0)
    dem = b.add_rows(J, -INF, d, name=f"demand{tag}")
    b.coef(dem[None, :], y, 1.0)
    b.offset += weight * p * float(d.sum())
    pv.y, pv.supply, pv.demand = y, sup, dem
    return pv


def terminal_cost(inst: Instance, t: int, x_T: np.ndarray, y: np.ndarray, demand: np.ndarray) -> float:
    """Delivery, shortage and salvage cost of the landfall period (fixed horizon)."""
    p, q = inst.costs.penalty, inst.costs.salvage
    return float(
        np.sum(inst.delivery_costs(t) * y)
        + p * (np.sum(demand) - np.sum(y))
        + q * (np.sum(x_T) - np.sum(y))
    )


def response_cost(inst: Instance, t: int, y: np.ndarray, over: np.ndarray, under: np.ndarray) -> float:
    """Delivery, salvage and shortage cost of one period (random horizon)."""
    return float(
        np.sum(inst.delivery_costs(t) * y)
        + inst.costs.salvage * np.sum(over)
        + inst.costs.penalty * np.sum(under)
    )


def add_prep_period(b: LpBuilder, inst: Instance, t: int, prev: Prev, *, weight: float = 1.0,
                    max_release: float = INF, tag: str = "") -> PeriodVars:
    """Prepositioning-only period whose residual stock is left to a later stage.

    Rows are ``x_prev - max_release <= x_t - in + out <= x_prev`` (the
    released remainder is delivered or salvaged in the second stage, so it
    is nonnegative and, usefully, no larger than the total demand) and
    ``out <= x_prev``.
    """
    I = inst.n_sp
    inc = ArcIncidence.of(inst)
    x = b.add_vars(I, 0.0, inst.network.capacity, weight * inst.costs.holding, name=f"x{tag}")
    f = b.add_vars(len(inst.arcs), 0.0, INF, weight * inst.arc_costs(t), name=f"f{tag}")
    rhs = _prev_rhs(prev, I)
    sup = b.add_rows(I, rhs - max_release, rhs, name=f"residual{tag}")
    b.coef(sup, x, 1.0)
    b.coef(sup[inc.dst], f, -1.0)
    b.coef(sup[inc.src[inc.inter]], f[inc.inter], 1.0)
    _prev_coefs(b, sup, prev)
    out = b.add_rows(I, -INF, rhs, name=f"outcap{tag}")
    b.coef(out[inc.src[inc.inter]], f[inc.inter], 1.0)
    _prev_coefs(b, out, prev)
    return PeriodVars(t, x, f, balance=sup, outcap=out)
