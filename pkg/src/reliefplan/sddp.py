"""Fully adaptive multistage policy trained by nested Benders decomposition.

Stage problems are indexed by the period ``t`` and the Markov state. The
expected cost-to-go after stage ``t`` in state ``s`` is approximated from
below by cuts ``theta >= slope . x_t + intercept`` stored under the key
``(t, s)``. Each iteration samples one forward path to collect trial
inventories, then walks backward adding one cut per visited (period,
state) pair.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .instance import Instance
from .lpcore import INF, LpBuilder, LpError, LpStatus, StageLp, WarmLp
from .markov import TAG_SDDP, HurricaneState, rng_stream
from .network import Prev, add_period, add_terminal_delivery


@dataclass(frozen=True)
class Cut:
    slope: np.ndarray
    intercept: float

    def value(self, x) -> float:
        return float(self.slope @ np.asarray(x, dtype=float) + self.intercept)


class CutPool:
    """Cuts keyed by (period, state index); the pool only grows."""

    def __init__(self, lower_bound: float = 0.0):
        self.lower_bound = float(lower_bound)
        self._cuts: dict[tuple[int, int], list[Cut]] = {}

    def add(self, t: int, state: int, cut: Cut) -> None:
        if not (np.all(np.isfinite(cut.slope)) and np.isfinite(cut.intercept)):
            raise ValueError("cut coefficients must be finite")
        self._cuts.setdefault((t, state), []).append(cut)

    def get(self, t: int, state: int) -> list[Cut]:
        return self._cuts.get((t, state), [])

    def keys(self):
        return self._cuts.keys()

    def items(self):
        return self._cuts.items()

    def __len__(self) -> int:
        return sum(len(v) for v in self._cuts.values())

    def value(self, t: int, state: int, x) -> float:
        """Current lower approximation of the expected cost-to-go at ``x``."""
        return max([self.lower_bound] + [c.value(x) for c in self.get(t, state)])


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 100_000
    time_limit_seconds: float = 10_800.0
    stability_epsilon: float = 1e-5
    stability_window: int = 500
    initial_lower_bound: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.stability_epsilon <= 0 or self.stability_window < 1:
            raise ValueError("stability_epsilon must be positive and stability_window >= 1")
        if self.max_iterations < 1 or self.time_limit_seconds <= 0:
            raise ValueError("iteration and time limits must be positive")


def stable(bounds, epsilon: float, window: int) -> bool:
    """True when the lower bound gained at most ``epsilon`` (relative) over ``window`` iterations."""
    if len(bounds) <= window:
        return False
    z, z_old = bounds[-1], bounds[-1 - window]
    return z - z_old <= epsilon * abs(z)


# --------------------------------------------------------------- stage LPs

def _needs_theta(inst: Instance, t: int, xi: HurricaneState) -> bool:
    mk = inst.markov
    if t >= inst.horizon:
        return False
    if mk.kind == "det":
        return True
    return any(not mk.is_absorbing(s2) for s2, _ in mk.successors(xi))


def _stage_builder(inst: Instance, t: int, xi: HurricaneState, demand, theta_lb: float):
    mk = inst.markov
    if not 1 <= t <= inst.horizon:
        raise ValueError(f"period {t} outside 1..{inst.horizon}")
    mk.check(xi)
    I = inst.n_sp
    b = LpBuilder(n_links=I)
    prev = Prev.link(np.arange(I))
    if mk.kind == "det":
        pv = add_period(b, inst, t, prev)
        if t == inst.horizon:
            d = np.zeros(inst.n_dp) if demand is None else demand
            add_terminal_delivery(b, inst, pv, d)
    else:
        pv = add_period(b, inst, t, prev, deliveries=True, demand=demand)
    theta = b.add_vars(1, theta_lb, INF, 1.0, name="theta") if _needs_theta(inst, t, xi) else None
    return b, pv, theta


def _with_cuts(b: LpBuilder, pv, theta, cuts) -> None:
    if theta is None or not cuts:
        return
    rows = b.add_rows(len(cuts), [c.intercept for c in cuts], INF, name="cuts")
    for r, c in zip(rows, cuts):
        b.coef(r, theta, 1.0)
        b.coef(r, pv.x, -c.slope)


def build_stage_det(inst: Instance, t: int, xi: HurricaneState, x_prev, cuts=(), demand=None,
                    theta_lb: float = 0.0) -> StageLp:
    """Stage LP of the fixed-landfall model; ``demand`` is used at the landfall period."""
    if inst.kind != "det":
        raise ValueError("instance kind must be 'det'")
    b, pv, theta = _stage_builder(inst, t, xi, demand, theta_lb)
    _with_cuts(b, pv, theta, list(cuts))
    return b.build(link_values=np.asarray(x_prev, dtype=float))


class ZeroStage:
    """Placeholder for an absorbing state: no decisions, value zero."""

    objective = 0.0

    def __repr__(self):
        return "ZeroStage()"


def build_stage_rand(inst: Instance, t: int, xi: HurricaneState, x_prev, cuts=(), demand=None,
                     theta_lb: float = 0.0):
    """Stage LP of the random-landfall model, or :class:`ZeroStage` when absorbing."""
    if inst.kind != "rand":
        raise ValueError("instance kind must be 'rand'")
    if inst.markov.is_absorbing(xi):
        return ZeroStage()
    if demand is None:
        demand = np.zeros(inst.n_dp)
    b, pv, theta = _stage_builder(inst, t, xi, demand, theta_lb)
    _with_cuts(b, pv, theta, list(cuts))
    return b.build(link_values=np.asarray(x_prev, dtype=float))


@dataclass
class StageDecision:
    t: int
    x: np.ndarray
    f: np.ndarray
    y: np.ndarray | None
    over: np.ndarray | None
    under: np.ndarray | None
    immediate_cost: float
    value: float  # immediate cost plus the cost-to-go approximation
    slope: np.ndarray | None = None


def zero_decision(inst: Instance, t: int) -> StageDecision:
    I, J = inst.n_sp, inst.n_dp
    return StageDecision(t, np.zeros(I), np.zeros(len(inst.arcs)), np.zeros((I, J)), np.zeros(I), np.zeros(J), 0.0, 0.0,
                         np.zeros(I))


class _Stage:
    """A warm HiGHS model for one (period, state) with its cut rows."""

    def __init__(self, inst: Instance, t: int, xi: HurricaneState, pool: CutPool):
        self.inst, self.t = inst, t
        b, pv, theta = _stage_builder(inst, t, xi, None, pool.lower_bound)
        key = inst.markov.index(xi)
        _with_cuts(b, pv, theta, pool.get(t, key))
        self.pv, self.theta = pv, (None if theta is None else int(theta[0]))
        self.lp = b.build(link_values=np.zeros(inst.n_sp))
        self.warm = WarmLp(self.lp)
        self.demand_rows = pv.demand
        self.det_terminal = inst.kind == "det" and t == inst.horizon
        self._demand_key = None

    def add_cut(self, cut: Cut) -> None:
        row = np.zeros(self.lp.n_cols)
        row[self.theta] = 1.0
        row[self.pv.x] = -cut.slope
        self.warm.add_rows(row, cut.intercept, INF)

    def set_demand(self, d: np.ndarray | None) -> None:
        if self.demand_rows is None:
            return
        d = np.zeros(self.inst.n_dp) if d is None else d
        key = d.tobytes()
        if key == self._demand_key:
            return
        self._demand_key = key
        if self.det_terminal:
            self.warm.set_row_bounds(self.demand_rows, -INF, d)
            self.warm.set_offset(self.inst.costs.penalty * float(d.sum()))
        else:
            self.warm.set_row_bounds(self.demand_rows, d, INF)

    def solve(self, x_prev, demand=None, context: str = "", cold: bool = False) -> StageDecision:
        self.warm.fix_link(x_prev)
        self.set_demand(demand)
        sol = self.warm.solve(context, cold)
        if sol.status is not LpStatus.OPTIMAL:
            raise LpError(sol.status, context)
        v = sol.x
        pv = self.pv
        theta = 0.0 if self.theta is None else float(v[self.theta])
        return StageDecision(
            self.t,
            v[pv.x],
            v[pv.f],
            None if pv.y is None else v[pv.y],
            None if pv.over is None else v[pv.over],
            None if pv.under is None else v[pv.under],
            sol.objective - theta,
            sol.objective,
            sol.link_slope,
        )


class OfflinePolicy:
    """Cut-based policy; evaluable on any path of the instance's kind."""

    def __init__(self, inst: Instance, pool: CutPool, config: TrainConfig | None = None):
        self.inst = inst
        self.pool = pool
        self.config = config or TrainConfig()
        self.kind = inst.kind
        self._stages: dict[tuple[int, int], _Stage] = {}

    def stage(self, t: int, xi: HurricaneState) -> _Stage:
        key = (t, self.inst.markov.index(xi))
        st = self._stages.get(key)
        if st is None:
            st = self._stages[key] = _Stage(self.inst, t, xi, self.pool)
        return st

    def add_cut(self, t: int, xi: HurricaneState, cut: Cut) -> None:
        key = (t, self.inst.markov.index(xi))
        self.pool.add(*key, cut)
        st = self._stages.get(key)
        if st is not None:
            st.add_cut(cut)

    def outcome_demands(self, t: int, xi: HurricaneState):
        """(demand, weight) pairs for stage ``t`` in state ``xi``."""
        inst, mk = self.inst, self.inst.markov
        if mk.is_landfall(xi, t):
            M = inst.demand.m_points
            return [(inst.outcome_demand(xi, m), 1.0 / M) for m in range(M)]
        return [(None, 1.0)]

    def act(self, t: int, xi: HurricaneState, x_prev, point_index: int | None = None,
            cold: bool = False) -> StageDecision:
        """Period-``t`` decision; ``point_index`` selects the landfall point when demand occurs.

        ``cold`` solves from scratch so the decision does not depend on
        earlier solves (used when simulating for reproducible reports).
        """
        inst = self.inst
        if inst.kind == "rand" and inst.markov.is_absorbing(xi):
            return zero_decision(inst, t)
        demand = None
        if inst.markov.is_landfall(xi, t):
            if point_index is None:
                raise ValueError("a landfall state needs the realized landfall point")
            demand = inst.outcome_demand(xi, point_index)
        return self.stage(t, xi).solve(np.asarray(x_prev, dtype=float), demand, f"t={t} state={xi}", cold)

    def expected_value(self, t: int, xi: HurricaneState, x_prev) -> tuple[float, np.ndarray]:
        """Stage value averaged over landfall points, with its slope in ``x_prev``."""
        if self.inst.kind == "rand" and self.inst.markov.is_absorbing(xi):
            return 0.0, np.zeros(self.inst.n_sp)
        st = self.stage(t, xi)
        v, g = 0.0, np.zeros(self.inst.n_sp)
        for d, w in self.outcome_demands(t, xi):
            dec = st.solve(x_prev, d, f"t={t} state={xi}")
            v += w * dec.value
            g += w * dec.slope
        return v, g

    def lower_bound(self) -> float:
        inst = self.inst
        return self.expected_value(1, inst.initial_state, inst.initial_inventory)[0]


@dataclass
class TrainLog:
    iterations: list = field(default_factory=list)
    lower_bounds: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    stop_reason: str = ""

    def rows(self):
        return list(zip(self.iterations, self.lower_bounds, self.seconds))


def backward_cut(policy: OfflinePolicy, t: int, xi_prev: HurricaneState, x_trial) -> Cut:
    """Cut for the expected cost-to-go after period ``t-1`` in state ``xi_prev``."""
    v, g = 0.0, np.zeros(policy.inst.n_sp)
    for s2, p in policy.inst.markov.successors(xi_prev):
        vs, gs = policy.expected_value(t, s2, x_trial)
        v += p * vs
        g += p * gs
    return Cut(g, v - float(g @ x_trial))


def train(inst: Instance, cfg: TrainConfig = TrainConfig(), callback=None) -> tuple[OfflinePolicy, TrainLog]:
    """Nested Benders decomposition with single-path forward passes."""
    mk = inst.markov
    H = inst.horizon
    policy = OfflinePolicy(inst, CutPool(cfg.initial_lower_bound), cfg)
    log = TrainLog()
    start = time.perf_counter()
    for n in range(1, cfg.max_iterations + 1):
        rng = rng_stream(cfg.seed, TAG_SDDP, n)
        path = mk.sample_path(inst.initial_state, rng)
        trial = []  # (t, state, x_t)
        x = inst.initial_inventory
        for t in range(1, H + 1):
            xi = path[t - 1]
            if mk.kind == "rand" and mk.is_absorbing(xi):
                break
            m = int(rng.integers(inst.demand.m_points)) if mk.is_landfall(xi, t) else None
            dec = policy.act(t, xi, x, m)
            x = dec.x
            trial.append((t, xi, x))
        for t_prev, xi_prev, x_trial in reversed(trial):
            if t_prev >= H or not _needs_theta(inst, t_prev, xi_prev):
                continue
            cut = backward_cut(policy, t_prev + 1, xi_prev, x_trial)
            policy.add_cut(t_prev, xi_prev, cut)
        lb = policy.lower_bound()
        elapsed = time.perf_counter() - start
        log.iterations.append(n)
        log.lower_bounds.append(lb)
        log.seconds.append(elapsed)
        if callback is not None:
            callback(n, lb, elapsed)
        if stable(log.lower_bounds, cfg.stability_epsilon, cfg.stability_window):
            log.stop_reason = "stable"
            break
        if elapsed >= cfg.time_limit_seconds:
            log.stop_reason = "time"
            break
    else:
        log.stop_reason = "iterations"
    return policy, log


# ------------------------------------------------------------------- files

def save_policy(policy: OfflinePolicy, path) -> None:
    mk = policy.inst.markov
    cuts = [
        {"t": t, "state": s, "slope": c.slope.tolist(), "intercept": c.intercept}
        for (t, s), lst in sorted(policy.pool.items())
        for c in lst
    ]
    doc = {
        "format": "reliefplan-policy/1",
        "kind": policy.kind,
        "n_states": mk.n_states,
        "lower_bound": policy.pool.lower_bound,
        "config": asdict(policy.config),
        "cuts": cuts,
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_policy(path, inst: Instance) -> OfflinePolicy:
    doc = json.loads(Path(path).read_text())
    if doc.get("kind") != inst.kind:
        raise ValueError(f"policy kind {doc.get('kind')!r} does not match instance kind {inst.kind!r}")
    if doc.get("n_states") != inst.markov.n_states:
        raise ValueError("policy was trained on a different Markov state space")
    pool = CutPool(doc["lower_bound"])
    for c in doc["cuts"]:
        slope = np.asarray(c["slope"], dtype=float)
        if slope.shape != (inst.n_sp,):
            raise ValueError("cut slope length does not match the number of staging points")
        pool.add(int(c["t"]), int(c["state"]), Cut(slope, float(c["intercept"])))
    return OfflinePolicy(inst, pool, TrainConfig(**doc["config"]))
