"""Static two-stage approximations solved by the L-shaped method.

All prepositioning decisions (inventories ``x`` and flows ``f``) are fixed
in the first stage. The second stage reacts to the landfall outcome:

* fixed landfall time: the landfall period's flows and deliveries, given
  the inventory left at the end of the previous period;
* random landfall time: deliveries, salvage and shortage in every period,
  with a reimbursement of first-stage logistics costs scheduled for periods
  in which the storm has already been absorbed (landed or dissipated).

The same machinery serves the rolling-horizon policies, which re-solve a
residual-horizon version of these models in every period.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .instance import Instance
from .lpcore import INF, LpBuilder, LpError, LpStatus, WarmLp, solve
from .markov import TAG_TWOSTAGE, HurricaneState, rng_stream
from .network import (
    ArcIncidence,
    Prev,
    add_period,
    add_prep_period,
    add_terminal_delivery,
    logistics_cost,
)
from .sddp import TrainConfig, stable

NEGATIVE_RECOURSE_LB = -1e10
EXACT_TOL = 1e-7
DEFAULT_SCENARIOS = 100


@dataclass(frozen=True, eq=False)
class Outcome:
    """A second-stage outcome: landfall demand plus the timing that matters."""

    weight: float
    demand: np.ndarray  # landfall demand per DP (zeros if none)
    landfall_period: int | None
    last_active: int  # last period before absorption (horizon if never absorbed)
    key: tuple


@dataclass(frozen=True, eq=False)
class TrainingScenarioSet:
    outcomes: tuple
    seed: int | None
    n_samples: int

    def __post_init__(self):
        total = sum(o.weight for o in self.outcomes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"scenario weights sum to {total}")

    def __len__(self):
        return len(self.outcomes)


def _outcome_from_path(inst: Instance, t0: int, path, m: int) -> tuple:
    """Key and fields of the outcome reached along ``path`` (path[0] is at period t0)."""
    mk = inst.markov
    H = inst.horizon
    if mk.kind == "det":
        s = path[-1]
        return ("det", s.alpha, s.lx, m), inst.outcome_demand(s, m), H, H
    land, last = None, H
    for k, s in enumerate(path):
        t = t0 + k
        if mk.is_absorbing(s):
            last = t - 1
            break
        if land is None and mk.is_landfall(s):
            land = t
    if land is None:
        return ("rand", None, 0, 0, 0, last), np.zeros(inst.n_dp), None, last
    s = path[land - t0]
    return ("rand", land, s.alpha, s.lx, m, last), inst.outcome_demand(s, m), land, last


def _collect(inst, t0, draws, seed, n) -> TrainingScenarioSet:
    acc: dict = {}
    for path, m, w in draws:
        key, d, land, last = _outcome_from_path(inst, t0, path, m)
        if key in acc:
            acc[key][0] += w
        else:
            acc[key] = [w, d, land, last]
    outs = tuple(Outcome(v[0], v[1], v[2], v[3], k) for k, v in sorted(acc.items(), key=lambda kv: repr(kv[0])))
    return TrainingScenarioSet(outs, seed, n)


def sample_scenarios(inst: Instance, xi0: HurricaneState, t0: int, k: int, rng: np.random.Generator,
                     seed: int | None = None) -> TrainingScenarioSet:
    """``k`` equally likely sampled trajectories from ``xi0`` at period ``t0``, merged by outcome."""
    mk = inst.markov
    length = inst.horizon - t0 + 1
    draws = []
    for _ in range(k):
        path = mk.sample_path(xi0, rng, length)
        draws.append((path, int(rng.integers(inst.demand.m_points)), 1.0 / k))
    return _collect(inst, t0, draws, seed, k)


def training_scenarios(inst: Instance, k: int = DEFAULT_SCENARIOS, seed: int = 0) -> TrainingScenarioSet:
    return sample_scenarios(inst, inst.initial_state, 1, k, rng_stream(seed, TAG_TWOSTAGE), seed)


def enumerate_scenarios(inst: Instance, xi0: HurricaneState | None = None, t0: int = 1) -> TrainingScenarioSet:
    """Exact outcome distribution from ``xi0`` (fixed landfall time only)."""
    if inst.kind != "det":
        raise ValueError("exact enumeration is offered for the fixed landfall time only")
    xi0 = inst.initial_state if xi0 is None else xi0
    M = inst.demand.m_points
    draws = []
    for s, p in inst.markov.n_step_distribution(xi0, inst.horizon - t0):
        for m in range(M):
            draws.append(((s,), m, p / M))
    return _collect(inst, t0, draws, None, len(draws))


# ---------------------------------------------------------------- results

@dataclass(frozen=True, eq=False)
class StaticPlan:
    """First-stage prepositioning plan for periods ``t0 .. t0 + len(x) - 1``."""

    kind: str
    t0: int
    x_prev: np.ndarray
    x: np.ndarray  # (P, I)
    f: np.ndarray  # (P, A)
    value: float = np.nan
    lower_bound: float = np.nan
    y0: np.ndarray | None = None  # current-period response (random-time rolls)
    over0: np.ndarray | None = None
    under0: np.ndarray | None = None

    @property
    def periods(self) -> range:
        return range(self.t0, self.t0 + len(self.x))

    def first_stage_cost(self, inst: Instance, upto: int | None = None) -> float:
        total = 0.0
        for k, t in enumerate(self.periods):
            if upto is not None and t > upto:
                break
            total += logistics_cost(inst, t, self.x[k], self.f[k])
        return total


@dataclass
class LShapedLog:
    iterations: list = field(default_factory=list)
    lower_bounds: list = field(default_factory=list)
    upper_bounds: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    stop_reason: str = ""
    cuts: list = field(default_factory=list)  # (slope, intercept) on the linking vector

    def rows(self):
        return list(zip(self.iterations, self.lower_bounds, self.seconds))


def l_shaped(master, link_cols, theta_col: int, recourse, cfg: TrainConfig, exact_tol: float = EXACT_TOL,
             initial_cuts=()):
    """Single-cut L-shaped loop.

    ``recourse(z)`` returns the expected second-stage value and a
    subgradient at the linking vector ``z = x[link_cols]``. Returns the best
    master solution found, its upper bound, and the log. ``initial_cuts``
    are extra master rows ``(row, lower)`` known to be valid in advance.
    """
    w = WarmLp(master)
    for row, lower in initial_cuts:
        w.add_rows(row, lower, INF)
    log = LShapedLog()
    best_ub, best_x = INF, None
    start = time.perf_counter()
    link_cols = np.asarray(link_cols)
    for n in range(1, cfg.max_iterations + 1):
        sol = w.solve("master")
        if sol.status is not LpStatus.OPTIMAL:
            raise LpError(sol.status, f"L-shaped master, iteration {n}")
        z = sol.x[link_cols]
        theta = sol.x[theta_col]
        q, g = recourse(z)
        ub = sol.objective - theta + q
        if ub < best_ub:
            best_ub, best_x = ub, sol.x.copy()
        intercept = q - float(g @ z)
        log.cuts.append((g.copy(), intercept))
        row = np.zeros(master.n_cols)
        row[theta_col] = 1.0
        row[link_cols] = -g
        w.add_rows(row, intercept, INF)
        log.iterations.append(n)
        log.lower_bounds.append(sol.objective)
        log.upper_bounds.append(best_ub)
        log.seconds.append(time.perf_counter() - start)
        if best_ub - sol.objective <= exact_tol * (1.0 + abs(best_ub)):
            log.stop_reason = "optimal"
            break
        if stable(log.lower_bounds, cfg.stability_epsilon, cfg.stability_window):
            log.stop_reason = "stable"
            break
        if log.seconds[-1] >= cfg.time_limit_seconds:
            log.stop_reason = "time"
            break
    else:
        log.stop_reason = "iterations"
    return best_x, best_ub, log


# ------------------------------------------------------ fixed landfall time

class DetRecourse:
    """Expected landfall-period cost as a function of the inventory ``x_{T-1}``."""

    def __init__(self, inst: Instance, scenarios: TrainingScenarioSet):
        self.inst = inst
        self.outcomes = scenarios.outcomes
        I = inst.n_sp
        b = LpBuilder(n_links=I)
        pv = add_period(b, inst, inst.horizon, Prev.link(np.arange(I)))
        add_terminal_delivery(b, inst, pv, np.zeros(inst.n_dp))
        self.pv = pv
        self.lp = b.build()
        self.warm = WarmLp(self.lp)

    def solve_one(self, x_prev, demand, cold: bool = False):
        self.warm.fix_link(x_prev)
        self.warm.set_row_bounds(self.pv.demand, -INF, demand)
        self.warm.set_offset(self.inst.costs.penalty * float(np.sum(demand)))
        sol = self.warm.solve("landfall period", cold)
        if sol.status is not LpStatus.OPTIMAL:
            raise LpError(sol.status, "landfall period")
        return sol

    def __call__(self, x_prev):
        v, g = 0.0, np.zeros(self.inst.n_sp)
        for o in self.outcomes:
            sol = self.solve_one(x_prev, o.demand)
            v += o.weight * sol.objective
            g += o.weight * sol.link_slope
        return v, g


def _det_master(inst: Instance, t0: int, x_prev, theta_lb: float | None):
    """Periods t0..T-1; ``theta_lb=None`` omits the recourse variable."""
    b = LpBuilder()
    prev = Prev.const(x_prev)
    periods = []
    for t in range(t0, inst.horizon):
        pv = add_period(b, inst, t, prev, tag=str(t))
        periods.append(pv)
        prev = Prev.cols(pv.x)
    theta = None if theta_lb is None else int(b.add_vars(1, theta_lb, INF, 1.0, name="theta")[0])
    return b, periods, theta


def train_static_det(inst: Instance, cfg: TrainConfig = TrainConfig(), scenarios: TrainingScenarioSet | None = None,
                     t0: int = 1, x_prev=None, k: int = DEFAULT_SCENARIOS):
    """Static plan for periods ``t0 .. T-1`` with the landfall period as recourse."""
    if inst.kind != "det":
        raise ValueError("instance kind must be 'det'")
    if not 1 <= t0 < inst.horizon:
        raise ValueError(f"first period {t0} must precede the landfall period")
    if scenarios is None:
        scenarios = training_scenarios(inst, k, cfg.seed)
    x_prev = inst.initial_inventory if x_prev is None else np.asarray(x_prev, dtype=float)
    b, periods, theta = _det_master(inst, t0, x_prev, cfg.initial_lower_bound)
    master = b.build()
    recourse = DetRecourse(inst, scenarios)
    best, ub, log = l_shaped(master, periods[-1].x, theta, recourse, cfg)
    plan = StaticPlan(
        "det", t0, x_prev,
        np.array([best[pv.x] for pv in periods]),
        np.array([best[pv.f] for pv in periods]),
        ub, log.lower_bounds[-1],
    )
    return plan, log


# ----------------------------------------------------- random landfall time

class _Layout:
    """Indices of (x_t, f_t), t = t0..H, inside the linking vector."""

    def __init__(self, inst: Instance, t0: int):
        self.t0, self.H = t0, inst.horizon
        self.I, self.A = inst.n_sp, len(inst.arcs)
        self.P = self.H - t0 + 1
        self.size = self.P * (self.I + self.A)

    def x(self, t):
        k = t - self.t0
        return np.arange(k * self.I, (k + 1) * self.I)

    def f(self, t):
        k = t - self.t0
        base = self.P * self.I
        return np.arange(base + k * self.A, base + (k + 1) * self.A)

    def cost(self, inst: Instance, t) -> np.ndarray:
        c = np.zeros(self.size)
        c[self.x(t)] = inst.costs.holding
        c[self.f(t)] = inst.arc_costs(t)
        return c


def _add_response(b: LpBuilder, inst: Instance, s: int, lay: _Layout, x_prev, mode: str, zcols=None,
                  demand=None, active: bool = True, weight: float = 1.0):
    """Period-``s`` deliveries, salvage and shortage fed by the first-stage residual.

    Balance: ``sum_j y + over = x_{s-1} + in_s - out_s - x_s``. In ``link``
    mode the first-stage values are link constants, in ``cols`` mode they
    are columns ``zcols`` of the same LP.
    """
    I, J = inst.n_sp, inst.n_dp
    inc = ArcIncidence.of(inst)
    c = weight if active else 0.0
    y = b.add_vars(I * J, 0.0, INF, (c * inst.delivery_costs(s)).ravel()).reshape(I, J)
    over = b.add_vars(I, 0.0, INF, c * inst.costs.salvage)
    under = b.add_vars(J, 0.0, INF, c * inst.costs.penalty)
    rhs = np.asarray(x_prev, dtype=float) if s == lay.t0 else np.zeros(I)
    bal = b.add_rows(I, rhs, rhs)
    b.coef(bal[:, None], y, 1.0)
    b.coef(bal, over, 1.0)
    r, k = np.nonzero(inc.net)
    terms = [(bal, lay.x(s), -np.ones(I)), (bal[r], lay.f(s)[k], inc.net[r, k])]
    if s > lay.t0:
        terms.append((bal, lay.x(s - 1), np.ones(I)))
    for rows, idx, coef in terms:
        if mode == "link":
            b.link_coef(rows, idx, coef)
        else:
            b.coef(rows, zcols[idx], -coef)
    d = np.zeros(J) if demand is None else demand
    dem = b.add_rows(J, d, INF)
    b.coef(dem[None, :], y, 1.0)
    b.coef(dem, under, 1.0)
    return y, over, under, dem


class RandRecourse:
    """Expected second-stage value, reimbursement included, for random landfall time.

    Periods ``t1 .. H`` are second-stage periods; absorbed periods (after
    ``last_active``) carry no delivery/salvage/shortage cost, and their
    first-stage logistics costs are credited back.
    """

    def __init__(self, inst: Instance, t0: int, t1: int, x_prev, scenarios: TrainingScenarioSet):
        self.inst, self.t0, self.t1 = inst, t0, t1
        self.x_prev = np.asarray(x_prev, dtype=float)
        self.lay = lay = _Layout(inst, t0)
        self.outcomes = scenarios.outcomes
        b = LpBuilder(n_links=lay.size)
        self.blocks = {}
        for s in range(t1, inst.horizon + 1):
            self.blocks[s] = _add_response(b, inst, s, lay, x_prev, "link")
        self.lp = b.build()
        self.warm = WarmLp(self.lp)
        self._costs = {}
        self._reimb = {}
        self._state = (None, None)

    def _cost_vector(self, last_active: int):
        hit = self._costs.get(last_active)
        if hit is None:
            cols, vals = [], []
            for s, (y, over, under, _) in self.blocks.items():
                on = 1.0 if s <= last_active else 0.0
                cols += [y.ravel(), over, under]
                vals += [on * self.inst.delivery_costs(s).ravel(), np.full(len(over), on * self.inst.costs.salvage),
                         np.full(len(under), on * self.inst.costs.penalty)]
            hit = self._costs[last_active] = (np.concatenate(cols), np.concatenate(vals))
        return hit

    def reimbursement(self, last_active: int) -> np.ndarray:
        hit = self._reimb.get(last_active)
        if hit is None:
            hit = np.zeros(self.lay.size)
            for t in range(max(self.t0, last_active + 1), self.inst.horizon + 1):
                hit += self.lay.cost(self.inst, t)
            self._reimb[last_active] = hit
        return hit

    def floor_cut(self):
        """A valid cut ``theta >= g.z + c`` built before any subproblem is solved.

        Deliveries and shortages cost nothing negative, so each active
        period's response costs at least ``min(q, 0)`` times the stock released
        that period (``x_{s-1} + in_s - out_s - x_s``). Adding the reimbursement
        gives a bound that is linear in ``z`` and keeps early masters bounded.
        """
        inst, lay = self.inst, self.lay
        inflow = ArcIncidence.of(inst).net.sum(axis=0)
        q = min(inst.costs.salvage, 0.0)
        rel = {}
        for s in self.blocks:
            a, c = np.zeros(lay.size), 0.0
            a[lay.x(s)] -= 1.0
            a[lay.f(s)] += inflow
            if s > self.t0:
                a[lay.x(s - 1)] += 1.0
            else:
                c = float(np.sum(self.x_prev))
            rel[s] = (a, c)
        g, c = np.zeros(lay.size), 0.0
        for o in self.outcomes:
            g -= o.weight * self.reimbursement(o.last_active)
            for s, (a, c0) in rel.items():
                if s <= o.last_active:
                    g += o.weight * q * a
                    c += o.weight * q * c0
        return g, c

    def solve_one(self, z, o: Outcome, cold: bool = False):
        if self._state[0] != o.last_active:
            self.warm.set_costs(*self._cost_vector(o.last_active))
        dkey = (o.landfall_period, o.key)
        if self._state[1] != dkey:
            for s, (_, _, _, dem) in self.blocks.items():
                d = o.demand if s == o.landfall_period else 0.0
                self.warm.set_row_bounds(dem, d, INF)
        self._state = (o.last_active, dkey)
        self.warm.fix_link(z)
        sol = self.warm.solve("second stage", cold)
        if sol.status is not LpStatus.OPTIMAL:
            raise LpError(sol.status, "second stage")
        r = self.reimbursement(o.last_active)
        return sol.objective - float(r @ z), sol.link_slope - r, sol

    def __call__(self, z):
        v, g = 0.0, np.zeros(self.lay.size)
        for o in self.outcomes:
            vo, go, _ = self.solve_one(z, o)
            v += o.weight * vo
            g += o.weight * go
        return v, g


def _rand_master(inst: Instance, t0: int, x_prev, theta_lb: float | None, current_demand=None):
    """First stage over t0..H; with ``current_demand`` period t0 also responds to demand."""
    lay = _Layout(inst, t0)
    b = LpBuilder()
    prev = Prev.const(x_prev)
    periods, resp = [], None
    # releasing more than the largest total demand could only feed salvage
    max_release = inst.demand.d_bar * inst.n_dp
    for t in range(t0, inst.horizon + 1):
        if t == t0 and current_demand is not None:
            pv = add_period(b, inst, t, prev, deliveries=True, demand=current_demand, tag=str(t))
            resp = pv
        else:
            pv = add_prep_period(b, inst, t, prev, max_release=max_release, tag=str(t))
        periods.append(pv)
        prev = Prev.cols(pv.x)
    theta = None if theta_lb is None else int(b.add_vars(1, theta_lb, INF, 1.0, name="theta")[0])
    zcols = np.zeros(lay.size, dtype=int)
    for pv in periods:
        zcols[lay.x(pv.t)] = pv.x
        zcols[lay.f(pv.t)] = pv.f
    return b, periods, theta, zcols, resp


def train_static_rand(inst: Instance, cfg: TrainConfig | None = None, scenarios: TrainingScenarioSet | None = None,
                      t0: int = 1, x_prev=None, current_demand=None, k: int = DEFAULT_SCENARIOS):
    """Static plan over ``t0 .. T_max`` with reimbursement for absorbed periods.

    The recourse can be negative, so ``theta`` starts from
    ``NEGATIVE_RECOURSE_LB`` plus one valid floor cut; ``cfg`` supplies the
    termination rule and sampling seed only.

    With ``current_demand`` (rolling use) the period-``t0`` response is a
    first-stage decision against that known demand.
    """
    if inst.kind != "rand":
        raise ValueError("instance kind must be 'rand'")
    cfg = cfg or TrainConfig()
    if scenarios is None:
        scenarios = training_scenarios(inst, k, cfg.seed)
    x_prev = inst.initial_inventory if x_prev is None else np.asarray(x_prev, dtype=float)
    t1 = t0 + 1 if current_demand is not None else t0
    last_roll = t1 > inst.horizon  # nothing left for a second stage
    b, periods, theta, zcols, resp = _rand_master(
        inst, t0, x_prev, None if last_roll else NEGATIVE_RECOURSE_LB, current_demand)
    master = b.build()
    if last_roll:
        sol = solve(master)
        if sol.status is not LpStatus.OPTIMAL:
            raise LpError(sol.status, "final-period problem")
        best, ub = sol.x, sol.objective
        log = LShapedLog([1], [ub], [ub], [0.0], "optimal")
    else:
        recourse = RandRecourse(inst, t0, t1, x_prev, scenarios)
        g, c = recourse.floor_cut()
        row = np.zeros(master.n_cols)
        row[theta] = 1.0
        row[zcols] = -g
        best, ub, log = l_shaped(master, zcols, theta, recourse, cfg, initial_cuts=[(row, c)])
    plan = StaticPlan(
        "rand", t0, x_prev,
        np.array([best[pv.x] for pv in periods]),
        np.array([best[pv.f] for pv in periods]),
        ub, log.lower_bounds[-1],
        None if resp is None else best[resp.y],
        None if resp is None else best[resp.over],
        None if resp is None else best[resp.under],
    )
    return plan, log


# ------------------------------------------------- deterministic equivalent

def solve_extensive(inst: Instance, scenarios: TrainingScenarioSet, t0: int = 1, x_prev=None,
                    current_demand=None) -> StaticPlan:
    """Static plan from one LP holding every outcome (same optimum as the L-shaped loop).

    ``current_demand`` has the meaning it has in :func:`train_static_rand`.
    """
    x_prev = inst.initial_inventory if x_prev is None else np.asarray(x_prev, dtype=float)
    resp = None
    if inst.kind == "det":
        if current_demand is not None:
            raise ValueError("current-period demand applies to the random landfall time only")
        b, periods, _ = _det_master(inst, t0, x_prev, None)
        for o in scenarios.outcomes:
            pv = add_period(b, inst, inst.horizon, Prev.cols(periods[-1].x), weight=o.weight)
            add_terminal_delivery(b, inst, pv, o.demand, weight=o.weight)
    else:
        b, periods, _, zcols, resp = _rand_master(inst, t0, x_prev, None, current_demand)
        lay = _Layout(inst, t0)
        t1 = t0 + 1 if current_demand is not None else t0
        for o in scenarios.outcomes:
            for s in range(t1, inst.horizon + 1):
                d = o.demand if s == o.landfall_period else None
                _add_response(b, inst, s, lay, x_prev, "cols", zcols, d, s <= o.last_active, o.weight)
            for t in range(max(t0, o.last_active + 1), inst.horizon + 1):
                b.add_cost(zcols, -o.weight * lay.cost(inst, t))
    sol = solve(b.build())
    if sol.status is not LpStatus.OPTIMAL:
        raise LpError(sol.status, "deterministic equivalent")
    v = sol.x
    return StaticPlan(
        inst.kind, t0, x_prev,
        np.array([v[pv.x] for pv in periods]),
        np.array([v[pv.f] for pv in periods]),
        sol.objective, sol.objective,
        None if resp is None else v[resp.y],
        None if resp is None else v[resp.over],
        None if resp is None else v[resp.under],
    )


def deterministic_equivalent(inst: Instance, scenarios: TrainingScenarioSet, t0: int = 1, x_prev=None) -> float:
    """Optimal value of the static model with every outcome expanded in one LP."""
    return solve_extensive(inst, scenarios, t0, x_prev).value


# --------------------------------------------------------------- evaluation

@dataclass
class StaticEvaluation:
    cost: float
    procurement: np.ndarray  # units bought from the MDC per period


def _eval_det_recourse(inst: Instance) -> DetRecourse:
    hit = inst.memo.get("static_eval_det")
    if hit is None:
        empty = TrainingScenarioSet((Outcome(1.0, np.zeros(inst.n_dp), None, inst.horizon, ()),), None, 1)
        hit = inst.memo["static_eval_det"] = DetRecourse(inst, empty)
    return hit


def _eval_rand_recourse(inst: Instance, plan: StaticPlan) -> RandRecourse:
    key = ("static_eval_rand", plan.t0, plan.x_prev.tobytes())
    hit = inst.memo.get(key)
    if hit is None:
        empty = TrainingScenarioSet((Outcome(1.0, np.zeros(inst.n_dp), None, inst.horizon, ()),), None, 1)
        hit = inst.memo[key] = RandRecourse(inst, plan.t0, plan.t0, plan.x_prev, empty)
    return hit


def evaluate_static(plan: StaticPlan, inst: Instance, scen) -> StaticEvaluation:
    """Realized cost of a static plan on one scenario.

    The first-stage plan is charged in full and the realized second stage
    is solved on top; for random landfall time the reimbursement cancels
    the charges of absorbed periods.
    """
    if plan.kind != inst.kind:
        raise ValueError("plan kind does not match instance kind")
    mdc = np.nonzero(inst.arc_from_mdc)[0]
    H = inst.horizon
    buy = np.zeros(H)
    if inst.kind == "det":
        rec = _eval_det_recourse(inst)
        sol = rec.solve_one(plan.x[-1], scen.demands[H - 1], cold=True)
        for k, t in enumerate(plan.periods):
            buy[t - 1] = plan.f[k][mdc].sum()
        buy[H - 1] = sol.x[rec.pv.f][mdc].sum()
        return StaticEvaluation(plan.first_stage_cost(inst) + sol.objective, buy)
    last = scen.last_active_period
    land = scen.landfall_period
    demand = scen.demands[land - 1] if land else np.zeros(inst.n_dp)
    out = Outcome(1.0, demand, land, last, ("eval", land, demand.tobytes()))
    rec = _eval_rand_recourse(inst, plan)
    z = np.concatenate([plan.x.ravel(), plan.f.ravel()])
    q, _, _ = rec.solve_one(z, out, cold=True)
    for k, t in enumerate(plan.periods):
        if t <= last:
            buy[t - 1] = plan.f[k][mdc].sum()
    return StaticEvaluation(plan.first_stage_cost(inst) + q, buy)


# -------------------------------------------------------------------- files

def save_plan(plan: StaticPlan, path) -> None:
    doc = {
        "format": "reliefplan-plan/1",
        "kind": plan.kind,
        "t0": plan.t0,
        "x_prev": plan.x_prev.tolist(),
        "periods": list(plan.periods),
        "x": plan.x.tolist(),
        "f": plan.f.tolist(),
        "value": plan.value,
        "lower_bound": plan.lower_bound,
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_plan(path, inst: Instance | None = None) -> StaticPlan:
    doc = json.loads(Path(path).read_text())
    plan = StaticPlan(doc["kind"], int(doc["t0"]), np.asarray(doc["x_prev"], float), np.asarray(doc["x"], float),
                      np.asarray(doc["f"], float), float(doc["value"]), float(doc["lower_bound"]))
    if inst is not None:
        if plan.kind != inst.kind:
            raise ValueError("plan kind does not match instance kind")
        if plan.x.shape[1] != inst.n_sp or plan.f.shape[1] != len(inst.arcs):
            raise ValueError("plan dimensions do not match the instance network")
    return plan
