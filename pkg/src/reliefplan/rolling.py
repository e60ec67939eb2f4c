"""Rolling-horizon two-stage policies.

At every period the policy solves a two-stage look-ahead model from the
current hurricane state and inventory, implements only the current
period's decisions, observes the next state and rolls forward.

The look-ahead scenarios of the roll at period ``t`` on evaluation path
``n`` come from the stream ``(seed, TAG_ROLL, n, t)``, so every path draws
its own sample-average look-aheads and full evaluations are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Instance
from .lpcore import LpError
from .markov import TAG_ROLL, HurricaneState, rng_stream
from .network import logistics_cost, response_cost
from .sddp import TrainConfig
from .twostage import (
    DEFAULT_SCENARIOS,
    _eval_det_recourse,
    sample_scenarios,
    solve_extensive,
    train_static_det,
    train_static_rand,
)

METHODS = ("lshaped", "extensive")


@dataclass(frozen=True)
class RollState:
    """Where a rolling policy stands before deciding period ``t_roll``."""

    t_roll: int
    xi: HurricaneState
    x_prev: np.ndarray
    cost: float = 0.0

    def advance(self, decision: "RollDecision", xi_next: HurricaneState | None) -> "RollState":
        return RollState(self.t_roll + 1, xi_next, decision.x, self.cost + decision.cost)


@dataclass(frozen=True, eq=False)
class RollDecision:
    """Implemented decisions of one period and their immediate cost."""

    t: int
    x: np.ndarray
    f: np.ndarray
    y: np.ndarray | None
    over: np.ndarray | None
    under: np.ndarray | None
    cost: float


@dataclass(frozen=True)
class RollConfig:
    """Look-ahead settings shared by every roll.

    ``method`` picks how each look-ahead is solved: the L-shaped loop with
    ``train`` as its termination rule, or the equivalent single extensive
    LP (same optimum, much faster for many rolls).
    """

    train: TrainConfig = TrainConfig()
    scenarios: int = DEFAULT_SCENARIOS
    seed: int = 0
    method: str = "lshaped"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.scenarios < 1:
            raise ValueError("at least one look-ahead scenario is needed")


def _roll_scenarios(inst: Instance, rs: RollState, cfg: RollConfig, path: int):
    rng = rng_stream(cfg.seed, TAG_ROLL, path, rs.t_roll)
    return sample_scenarios(inst, rs.xi, rs.t_roll, cfg.scenarios, rng, cfg.seed)


def _zero(inst: Instance, t: int) -> RollDecision:
    I, J = inst.n_sp, inst.n_dp
    return RollDecision(t, np.zeros(I), np.zeros(len(inst.arcs)), np.zeros((I, J)), np.zeros(I), np.zeros(J), 0.0)


def rh_step_det(inst: Instance, rs: RollState, cfg: RollConfig = RollConfig(),
                point_index: int | None = None, path: int = 0) -> RollDecision:
    """One roll of the fixed-landfall policy on evaluation path ``path``.

    Before landfall a static model over ``t_roll .. T`` is solved and only
    ``(x, f)`` of ``t_roll`` is kept. At ``T`` the landfall LP is solved
    against the realized demand, which needs ``point_index``.
    """
    if inst.kind != "det":
        raise ValueError("instance kind must be 'det'")
    t, T = rs.t_roll, inst.horizon
    if t == T:
        if point_index is None:
            raise ValueError("the landfall period needs the realized landfall point")
        rec = _eval_det_recourse(inst)
        sol = rec.solve_one(rs.x_prev, inst.outcome_demand(rs.xi, point_index), cold=True)
        pv = rec.pv
        return RollDecision(t, sol.x[pv.x], sol.x[pv.f], sol.x[pv.y], None, None, sol.objective)
    if not 1 <= t < T:
        raise ValueError(f"roll period {t} outside 1..{T}")
    scen = _roll_scenarios(inst, rs, cfg, path)
    if cfg.method == "extensive":
        plan = solve_extensive(inst, scen, t, rs.x_prev)
    else:
        plan, _ = train_static_det(inst, cfg.train, scen, t, rs.x_prev)
    x, f = plan.x[0], plan.f[0]
    return RollDecision(t, x, f, None, None, None, logistics_cost(inst, t, x, f))


def rh_step_rand(inst: Instance, rs: RollState, cfg: RollConfig = RollConfig(),
                 point_index: int | None = None, path: int = 0) -> RollDecision:
    """One roll of the random-landfall policy on evaluation path ``path``.

    The first stage holds ``(x, f)`` for ``t_roll .. T_max`` and the current
    period's deliveries against the current demand (zero before landfall).
    An absorbing state ends the policy with a zero decision.
    """
    if inst.kind != "rand":
        raise ValueError("instance kind must be 'rand'")
    mk, t = inst.markov, rs.t_roll
    if not 1 <= t <= inst.horizon:
        raise ValueError(f"roll period {t} outside 1..{inst.horizon}")
    if mk.is_absorbing(rs.xi):
        return _zero(inst, t)
    if mk.is_landfall(rs.xi, t):
        if point_index is None:
            raise ValueError("a landfall state needs the realized landfall point")
        demand = inst.outcome_demand(rs.xi, point_index)
    else:
        demand = np.zeros(inst.n_dp)
    scen = _roll_scenarios(inst, rs, cfg, path)
    if cfg.method == "extensive":
        plan = solve_extensive(inst, scen, t, rs.x_prev, demand)
    else:
        plan, _ = train_static_rand(inst, cfg.train, scen, t, rs.x_prev, demand)
    x, f = plan.x[0], plan.f[0]
    cost = logistics_cost(inst, t, x, f) + response_cost(inst, t, plan.y0, plan.over0, plan.under0)
    return RollDecision(t, x, f, plan.y0, plan.over0, plan.under0, cost)


@dataclass(frozen=True, eq=False)
class RollOutcome:
    """A full simulated trajectory of a rolling policy."""

    cost: float
    decisions: tuple

    def procurement(self, inst: Instance) -> np.ndarray:
        """Units bought from the MDC in each period (zero after the policy stops)."""
        mdc = np.nonzero(inst.arc_from_mdc)[0]
        buy = np.zeros(inst.horizon)
        for d in self.decisions:
            buy[d.t - 1] = d.f[mdc].sum()
        return buy


class RollingPolicy:
    """A rolling-horizon policy; solved rolls are memoized per path."""

    def __init__(self, inst: Instance, cfg: RollConfig = RollConfig()):
        self.inst, self.cfg = inst, cfg
        self._memo: dict = {}
        self.rolls_solved = 0

    def step(self, rs: RollState, point_index: int | None = None, path: int = 0) -> RollDecision:
        inst = self.inst
        needs_point = inst.markov.is_landfall(rs.xi, rs.t_roll) if inst.kind == "rand" else rs.t_roll == inst.horizon
        key = (path, rs.t_roll, inst.markov.index(rs.xi), np.asarray(rs.x_prev, dtype=float).tobytes(),
               point_index if needs_point else None)
        hit = self._memo.get(key)
        if hit is None:
            step = rh_step_det if inst.kind == "det" else rh_step_rand
            try:
                hit = step(inst, rs, self.cfg, point_index, path)
            except LpError as err:
                raise LpError(err.status, f"roll t={rs.t_roll} state={rs.xi}: {err.context}") from err
            self._memo[key] = hit
            self.rolls_solved += 1
        return hit

    def run(self, scen, path: int = 0) -> RollOutcome:
        """Simulate the policy along one scenario, the ``path``-th of an evaluation."""
        inst, H = self.inst, self.inst.horizon
        rs = RollState(1, scen.path[0], np.asarray(inst.initial_inventory, dtype=float))
        decisions = []
        for t in range(1, H + 1):
            if inst.kind == "rand" and inst.markov.is_absorbing(rs.xi):
                break
            dec = self.step(rs, scen.point_index, path)
            decisions.append(dec)
            rs = rs.advance(dec, scen.path[t] if t < H else None)
        return RollOutcome(rs.cost, tuple(decisions))
