"""Perfect-information benchmarks and the extensive-form scenario-tree oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Instance
from .lpcore import LpBuilder, LpError, LpStatus, solve
from .markov import HurricaneState
from .network import Prev, add_period, add_terminal_delivery

MAX_TREE_NODES = 100_000


@dataclass(frozen=True, eq=False)
class Scenario:
    """One realized hurricane trajectory with its landfall outcome.

    ``landfall_period`` is None when a random-time storm is absorbed
    (dissipates) before landfall. ``demands`` has one row per period and is
    zero except in the landfall period.
    """

    path: tuple
    landfall_period: int | None
    landfall_point: float | None
    point_index: int | None
    demands: np.ndarray
    absorbed_period: int | None = None  # first absorbing period (random kind)

    @property
    def horizon(self) -> int:
        return len(self.path)

    @property
    def last_active_period(self) -> int:
        """Last period that carries cost: the period before absorption."""
        return self.horizon if self.absorbed_period is None else self.absorbed_period - 1


def make_scenario(inst: Instance, path, point_index: int | None) -> Scenario:
    mk = inst.markov
    H = inst.horizon
    path = tuple(path)
    if len(path) != H:
        raise ValueError(f"path has {len(path)} periods, horizon is {H}")
    demands = np.zeros((H, inst.n_dp))
    if mk.kind == "det":
        T, absorbed = H, None
    else:
        T = next((t for t in range(1, H + 1) if mk.is_landfall(path[t - 1])), None)
        absorbed = next((t for t in range(1, H + 1) if mk.is_absorbing(path[t - 1])), None)
    if T is None:
        return Scenario(path, None, None, None, demands, absorbed)
    s = path[T - 1]
    m = int(point_index)
    demands[T - 1] = inst.outcome_demand(s, m)
    x = inst.landfall_points(s.lx)[m][0]
    return Scenario(path, T, x, m, demands, absorbed)


def sample_scenario(inst: Instance, rng: np.random.Generator) -> Scenario:
    path = inst.markov.sample_path(inst.initial_state, rng)
    m = int(rng.integers(inst.demand.m_points))
    return make_scenario(inst, path, m)


@dataclass(frozen=True, eq=False)
class CvResult:
    cost: float
    x: np.ndarray  # (H, I)
    f: np.ndarray  # (H, A)
    y: np.ndarray  # (I, J) for the fixed horizon, (H, I, J) for the random one
    over: np.ndarray | None = None
    under: np.ndarray | None = None


def _solve_or_raise(lp, context):
    sol = solve(lp)
    if sol.status is not LpStatus.OPTIMAL:
        raise LpError(sol.status, context)
    return sol


def solve_cv_det(inst: Instance, scen: Scenario) -> CvResult:
    """Optimal cost of the deterministic multiperiod problem on one scenario."""
    if inst.kind != "det":
        raise ValueError("fixed-landfall clairvoyant needs a 'det' instance")
    T = inst.horizon
    b = LpBuilder()
    prev = Prev.const(inst.initial_inventory)
    periods = []
    for t in range(1, T + 1):
        pv = add_period(b, inst, t, prev, tag=str(t))
        periods.append(pv)
        prev = Prev.cols(pv.x)
    add_terminal_delivery(b, inst, periods[-1], scen.demands[T - 1])
    sol = _solve_or_raise(b.build(), "clairvoyant")
    x = np.array([sol.x[pv.x] for pv in periods])
    f = np.array([sol.x[pv.f] for pv in periods])
    return CvResult(sol.objective, x, f, sol.x[periods[-1].y])


def solve_cv_rand(inst: Instance, scen: Scenario) -> CvResult:
    """Optimal cost of the random-landfall deterministic problem on one scenario."""
    if inst.kind != "rand":
        raise ValueError("random-landfall clairvoyant needs a 'rand' instance")
    H = inst.horizon
    b = LpBuilder()
    prev = Prev.const(inst.initial_inventory)
    periods = []
    for t in range(1, H + 1):
        pv = add_period(b, inst, t, prev, deliveries=True, demand=scen.demands[t - 1], tag=str(t))
        periods.append(pv)
        prev = Prev.cols(pv.x)
    sol = _solve_or_raise(b.build(), "clairvoyant")
    get = lambda name: np.array([sol.x[getattr(pv, name)] for pv in periods])
    return CvResult(sol.objective, get("x"), get("f"), get("y"), get("over"), get("under"))


def solve_cv(inst: Instance, scen: Scenario) -> CvResult:
    return solve_cv_det(inst, scen) if inst.kind == "det" else solve_cv_rand(inst, scen)


# ------------------------------------------------------------ scenario tree

class TreeTooLarge(ValueError):
    pass


def _tree_lp(inst: Instance, t0: int, roots, x_prev, max_nodes: int):
    """Extensive-form LP over the tree rooted at period ``t0``.

    ``roots`` lists (state, probability) pairs for period ``t0``; each
    period's decisions are indexed by the node (history) they follow.
    """
    mk = inst.markov
    H, M = inst.horizon, inst.demand.m_points
    b = LpBuilder()
    count = [0]

    def bump(n=1):
        count[0] += n
        if count[0] > max_nodes:
            raise TreeTooLarge(f"scenario tree exceeds {max_nodes} nodes")

    def grow(t: int, s: HurricaneState, prob: float, prev: Prev):
        if mk.kind == "det":
            if t < H:
                bump()
                pv = add_period(b, inst, t, prev, weight=prob)
                for s2, p2 in mk.successors(s):
                    grow(t + 1, s2, prob * p2, Prev.cols(pv.x))
            else:
                bump(M)
                for m in range(M):
                    pv = add_period(b, inst, t, prev, weight=prob / M)
                    add_terminal_delivery(b, inst, pv, inst.outcome_demand(s, m), weight=prob / M)
            return
        if mk.is_absorbing(s):
            return
        outcomes = [(inst.outcome_demand(s, m), prob / M) for m in range(M)] if mk.is_landfall(s) else [(None, prob)]
        for d, w in outcomes:
            bump()
            pv = add_period(b, inst, t, prev, weight=w, deliveries=True, demand=d)
            if t < H:
                for s2, p2 in mk.successors(s):
                    grow(t + 1, s2, w * p2, Prev.cols(pv.x))

    total = sum(p for _, p in roots)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"root probabilities sum to {total}")
    for s, p in roots:
        grow(t0, s, p, Prev.const(x_prev))
    return b.build()


def tree_value(inst: Instance, t0: int, roots, x_prev, max_nodes: int = MAX_TREE_NODES) -> float:
    """Exact expected optimal cost from period ``t0`` given ``x_prev``.

    With ``roots`` the conditional law of the period-``t0`` state this is
    the true expected cost-to-go that Benders cuts must under-estimate.
    """
    if t0 > inst.horizon:
        return 0.0
    lp = _tree_lp(inst, t0, list(roots), np.asarray(x_prev, dtype=float), max_nodes)
    if lp.n_cols == 0:
        return float(lp.offset)
    return _solve_or_raise(lp, "scenario tree").objective


def extensive_form_value(inst: Instance, max_nodes: int = MAX_TREE_NODES) -> float:
    """Optimal value of the fully adaptive problem via its scenario-tree LP."""
    return tree_value(inst, 1, [(inst.initial_state, 1.0)], inst.initial_inventory, max_nodes)
