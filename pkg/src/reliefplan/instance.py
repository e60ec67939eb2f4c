"""Problem instances: network, costs, demand model, Markov model, initial data."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .markov import (
    TAG_INSTANCE,
    AttributeChain,
    HurricaneState,
    Interval,
    MarkovModel,
    default_model,
    rng_stream,
)

MDC = -1  # node id of the major distribution center


class InstanceFormatError(ValueError):
    """Schema violation in an instance file; ``path`` names the offending key."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass(frozen=True, eq=False)
class Network:
    mdc: tuple[float, float]
    sp_coords: np.ndarray  # (I, 2)
    capacity: np.ndarray  # (I,)
    dp_coords: np.ndarray  # (J, 2)

    def __post_init__(self):
        sp = np.asarray(self.sp_coords, dtype=float).reshape(-1, 2)
        dp = np.asarray(self.dp_coords, dtype=float).reshape(-1, 2)
        u = np.asarray(self.capacity, dtype=float)
        if len(sp) < 1 or len(dp) < 1:
            raise ValueError("need at least one staging point and one demand point")
        if u.shape != (len(sp),):
            raise ValueError("one capacity per staging point")
        if np.any(u < 0) or not np.all(np.isfinite(u)):
            raise ValueError("capacities must be finite and nonnegative")
        for a in (sp, dp, u):
            a.setflags(write=False)
        object.__setattr__(self, "sp_coords", sp)
        object.__setattr__(self, "dp_coords", dp)
        object.__setattr__(self, "capacity", u)
        object.__setattr__(self, "mdc", (float(self.mdc[0]), float(self.mdc[1])))

    @property
    def n_sp(self) -> int:
        return len(self.sp_coords)

    @property
    def n_dp(self) -> int:
        return len(self.dp_coords)

    def __eq__(self, other):
        return (
            isinstance(other, Network)
            and self.mdc == other.mdc
            and np.array_equal(self.sp_coords, other.sp_coords)
            and np.array_equal(self.capacity, other.capacity)
            and np.array_equal(self.dp_coords, other.dp_coords)
        )

    __hash__ = None


@dataclass(frozen=True)
class CostModel:
    omega: float = 0.0038
    base: float = 5.0
    nu: float = 0.6
    penalty: float = 400.0  # p
    salvage: float = -0.25  # q
    holding: float = 1.0  # c^h per item-period

    def __post_init__(self):
        if self.penalty <= 0:
            raise ValueError("shortage penalty must be positive")
        if self.salvage >= 0:
            raise ValueError("salvage value must be negative (a credit)")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")

    @classmethod
    def from_base(cls, base: float = 5.0, nu: float = 0.6, omega: float = 0.0038) -> "CostModel":
        return cls(omega=omega, base=base, nu=nu, penalty=80 * base, salvage=-0.05 * base, holding=0.2 * base)

    def scale(self, t: int) -> float:
        return 1.0 + self.nu * (t - 1)


@dataclass(frozen=True)
class DemandParams:
    d_bar: float = 400.0
    delta_bar: float = 300.0
    m_points: int = 10

    def __post_init__(self):
        if self.d_bar <= 0 or self.delta_bar <= 0 or self.m_points < 1:
            raise ValueError("d_bar, delta_bar must be positive and m_points >= 1")


@dataclass(frozen=True, eq=False)
class Instance:
    network: Network
    costs: CostModel
    demand: DemandParams
    markov: MarkovModel
    initial_state: HurricaneState
    initial_inventory: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x0 = np.asarray(self.initial_inventory, dtype=float)
        if x0.shape != (self.network.n_sp,):
            raise ValueError("initial inventory needs one entry per staging point")
        x0.setflags(write=False)
        object.__setattr__(self, "initial_inventory", x0)
        self.markov.check(self.initial_state)

    def __eq__(self, other):
        return (
            isinstance(other, Instance)
            and self.network == other.network
            and self.costs == other.costs
            and self.demand == other.demand
            and self.markov == other.markov
            and self.initial_state == other.initial_state
            and np.array_equal(self.initial_inventory, other.initial_inventory)
        )

    __hash__ = None

    @property
    def kind(self) -> str:
        return self.markov.kind

    @property
    def horizon(self) -> int:
        return self.markov.horizon

    @property
    def n_sp(self) -> int:
        return self.network.n_sp

    @property
    def n_dp(self) -> int:
        return self.network.n_dp

    @cached_property
    def arcs(self) -> list[tuple[int, int]]:
        """Shipping arcs (src, dst): MDC to every SP, then SP to SP."""
        I = self.n_sp
        out = [(MDC, i) for i in range(I)]
        out += [(i, k) for i in range(I) for k in range(I) if i != k]
        return out

    @cached_property
    def arc_length(self) -> np.ndarray:
        mdc, sp = np.array(self.network.mdc), self.network.sp_coords
        a = np.array([np.linalg.norm((mdc if s == MDC else sp[s]) - sp[d]) for s, d in self.arcs])
        a.setflags(write=False)
        return a

    @cached_property
    def arc_from_mdc(self) -> np.ndarray:
        return np.array([s == MDC for s, _ in self.arcs])

    @cached_property
    def delivery_length(self) -> np.ndarray:
        sp, dp = self.network.sp_coords, self.network.dp_coords
        return np.linalg.norm(sp[:, None, :] - dp[None, :, :], axis=2)

    def procurement_cost(self, t: int) -> float:
        """h_t, the per-item surcharge for buying at the MDC in period t."""
        _check_period(t)
        return self.costs.base * self.costs.scale(t)

    def arc_costs(self, t: int) -> np.ndarray:
        """Per-item cost of each arc in period t, procurement surcharge included."""
        _check_period(t)
        c = self.costs.omega * self.costs.scale(t) * self.arc_length
        return c + self.procurement_cost(t) * self.arc_from_mdc

    def delivery_costs(self, t: int) -> np.ndarray:
        _check_period(t)
        return self.costs.omega * self.costs.scale(t) * self.delivery_length

    def landfall_points(self, lx_cell: int) -> list[tuple[float, float]]:
        return landfall_points(self, lx_cell)

    def demand_vector(self, alpha: int, landfall_x: float) -> np.ndarray:
        dp = self.network.dp_coords
        delta = np.hypot(dp[:, 0] - landfall_x, dp[:, 1])
        denom = (self.markov.n_intensity_levels - 1) ** 2
        d = self.demand.d_bar * (1.0 - delta / self.demand.delta_bar) * alpha**2 / denom
        return np.where(delta <= self.demand.delta_bar, d, 0.0)

    @cached_property
    def memo(self) -> dict:
        """Scratch cache for derived read-only data (demand vectors, incidence)."""
        return {}

    def outcome_demand(self, s: HurricaneState, m: int) -> np.ndarray:
        """Demand vector in landfall state ``s`` at its ``m``-th point (cached)."""
        key = ("demand", s.alpha, s.lx, m)
        d = self.memo.get(key)
        if d is None:
            x = self.landfall_points(s.lx)[m][0]
            d = self.demand_vector(s.alpha, x)
            d.setflags(write=False)
            self.memo[key] = d
        return d


def _check_period(t: int) -> None:
    if t < 1:
        raise ValueError(f"periods start at 1, got {t}")


def transport_cost_sp(inst: Instance, i: int, i2: int, t: int) -> float:
    """Per-item cost to ship from node ``i`` (MDC or SP) to SP ``i2`` in period t."""
    _check_period(t)
    if i2 == MDC:
        raise ValueError("no flow into the MDC")
    a = np.array(inst.network.mdc) if i == MDC else inst.network.sp_coords[i]
    dist = float(np.linalg.norm(a - inst.network.sp_coords[i2]))
    return inst.costs.omega * inst.costs.scale(t) * dist


def delivery_cost(inst: Instance, i: int, j: int, t: int) -> float:
    _check_period(t)
    return float(inst.costs.omega * inst.costs.scale(t) * inst.delivery_length[i, j])


def procurement_cost(inst: Instance, t: int) -> float:
    return inst.procurement_cost(t)


def landfall_points(inst: Instance, lx_cell: int) -> list[tuple[float, float]]:
    """M equally likely landfall x-coordinates, evenly spaced across the cell."""
    cell = inst.markov.lx.labels[lx_cell]
    M = inst.demand.m_points
    step = cell.width / M
    return [(cell.lower + step / 2 + step * m, 1.0 / M) for m in range(M)]


def demand(inst: Instance, alpha: int, landfall_x: float, j: int) -> float:
    return float(inst.demand_vector(alpha, landfall_x)[j])


def generate(
    sp_count: int = 3,
    dp_count: int = 10,
    nu: float = 0.6,
    seed: int = 0,
    kind: str = "det",
    alpha1: int = 1,
    d_bar: float = 400.0,
    delta_bar: float = 300.0,
    m_points: int = 10,
) -> Instance:
    """Random instance on the standard coastal layout; a pure function of its arguments."""
    if kind not in ("det", "rand"):
        raise ValueError(f"invalid kind {kind!r}")
    if sp_count < 1 or dp_count < 1:
        raise ValueError("sp_count and dp_count must be positive")
    rng = rng_stream(seed, TAG_INSTANCE)
    sp = np.column_stack([rng.uniform(0, 700, sp_count), rng.uniform(0, 100, sp_count)])
    dp = np.column_stack([rng.uniform(0, 700, dp_count), rng.uniform(100, 200, dp_count)])
    scale = d_bar * dp_count / sp_count
    cap = rng.uniform(0.05 * scale, 0.5 * scale, sp_count)
    markov = default_model(kind)
    s1 = HurricaneState(alpha1, 1, 0 if kind == "rand" else None)
    return Instance(
        network=Network((350.0, 450.0), sp, cap, dp),
        costs=CostModel.from_base(5.0, nu),
        demand=DemandParams(d_bar, delta_bar, m_points),
        markov=markov,
        initial_state=s1,
        initial_inventory=np.zeros(sp_count),
        meta={"sps": sp_count, "dps": dp_count, "nu": nu, "seed": seed, "kind": kind, "alpha1": alpha1},
    )


# ---------------------------------------------------------------- file format

def _interval_to_json(iv: Interval) -> list:
    return [iv.lower, None if math.isinf(iv.upper) else iv.upper]


def _chain_to_json(chain: AttributeChain, intervals: bool) -> dict:
    labels = [_interval_to_json(l) for l in chain.labels] if intervals else list(chain.labels)
    return {"labels": labels, "matrix": chain.matrix.tolist()}


def to_dict(inst: Instance) -> dict:
    net = inst.network
    mk = inst.markov
    chains = {"alpha": _chain_to_json(mk.alpha, False), "lx": _chain_to_json(mk.lx, True)}
    if mk.ly is not None:
        chains["ly"] = _chain_to_json(mk.ly, True)
    s = inst.initial_state
    return {
        "format": "reliefplan-instance/1",
        "network": {
            "mdc": list(net.mdc),
            "sps": {"x": net.sp_coords[:, 0].tolist(), "y": net.sp_coords[:, 1].tolist(),
                    "capacity": net.capacity.tolist()},
            "dps": {"x": net.dp_coords[:, 0].tolist(), "y": net.dp_coords[:, 1].tolist()},
        },
        "costs": {
            "omega": inst.costs.omega, "base": inst.costs.base, "nu": inst.costs.nu,
            "penalty": inst.costs.penalty, "salvage": inst.costs.salvage, "holding": inst.costs.holding,
        },
        "demand": {"d_bar": inst.demand.d_bar, "delta_bar": inst.demand.delta_bar, "m_points": inst.demand.m_points},
        "markov": {"kind": mk.kind, "chains": chains},
        "initial": {
            "state": {"alpha": s.alpha, "lx": s.lx, "ly": s.ly},
            "inventory": inst.initial_inventory.tolist(),
        },
        "horizon": mk.horizon,
        "meta": inst.meta,
    }


def save(inst: Instance, path) -> None:
    # json writes floats with repr, i.e. shortest round-trip (up to 17 digits)
    Path(path).write_text(json.dumps(to_dict(inst), indent=1) + "\n")


class _Doc:
    """Key-path aware accessor for validating nested dicts."""

    def __init__(self, data, path=""):
        self.data, self.path = data, path

    def _sub(self, key):
        return f"{self.path}.{key}" if self.path else key

    def get(self, key, default=...):
        if not isinstance(self.data, dict):
            raise InstanceFormatError(self.path or "<root>", "expected an object")
        if key not in self.data:
            if default is not ...:
                return default
            raise InstanceFormatError(self._sub(key), "missing required key")
        return self.data[key]

    def obj(self, key) -> "_Doc":
        v = self.get(key)
        if not isinstance(v, dict):
            raise InstanceFormatError(self._sub(key), "expected an object")
        return _Doc(v, self._sub(key))

    def num(self, key, default=...) -> float:
        v = self.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InstanceFormatError(self._sub(key), "expected a number")
        return v

    def array(self, key, ndim=1) -> np.ndarray:
        v = self.get(key)
        try:
            a = np.array(v, dtype=float)
        except (TypeError, ValueError):
            raise InstanceFormatError(self._sub(key), "expected a numeric array") from None
        if a.ndim != ndim:
            raise InstanceFormatError(self._sub(key), f"expected a {ndim}-d array")
        return a


def _chain_from_json(doc: _Doc, intervals: bool) -> AttributeChain:
    raw = doc.get("labels")
    if not isinstance(raw, list):
        raise InstanceFormatError(doc._sub("labels"), "expected a list")
    if intervals:
        labels = []
        for k, lab in enumerate(raw):
            if not (isinstance(lab, list) and len(lab) == 2):
                raise InstanceFormatError(f"{doc._sub('labels')}[{k}]", "expected [lower, upper]")
            labels.append(Interval(float(lab[0]), math.inf if lab[1] is None else float(lab[1])))
    else:
        labels = raw
    try:
        return AttributeChain(tuple(labels), doc.array("matrix", 2))
    except ValueError as e:
        if isinstance(e, InstanceFormatError):
            raise
        raise InstanceFormatError(doc._sub("matrix"), str(e)) from None


def from_dict(data: dict) -> Instance:
    root = _Doc(data)
    net = root.obj("network")
    mdc = net.array("mdc")
    sps, dps = net.obj("sps"), net.obj("dps")
    sp = np.column_stack([sps.array("x"), sps.array("y")])
    cap = sps.array("capacity")
    if cap.shape != (len(sp),):
        raise InstanceFormatError("network.sps.capacity", "length must match the number of staging points")
    dp = np.column_stack([dps.array("x"), dps.array("y")])
    c = root.obj("costs")
    costs = CostModel(c.num("omega"), c.num("base"), c.num("nu"), c.num("penalty"), c.num("salvage"), c.num("holding"))
    d = root.obj("demand")
    dem = DemandParams(d.num("d_bar"), d.num("delta_bar"), int(d.num("m_points")))
    mk = root.obj("markov")
    kind = mk.get("kind")
    if kind not in ("det", "rand"):
        raise InstanceFormatError("markov.kind", f"expected 'det' or 'rand', got {kind!r}")
    ch = mk.obj("chains")
    alpha = _chain_from_json(ch.obj("alpha"), False)
    lx = _chain_from_json(ch.obj("lx"), True)
    ly = _chain_from_json(ch.obj("ly"), True) if kind == "rand" else None
    horizon = int(root.num("horizon"))
    try:
        model = MarkovModel(kind, alpha, lx, ly, horizon)
    except ValueError as e:
        raise InstanceFormatError("markov", str(e)) from None
    ini = root.obj("initial")
    st = ini.obj("state")
    ly1 = st.get("ly", None)
    s1 = HurricaneState(int(st.num("alpha")), int(st.num("lx")), None if ly1 is None else int(ly1))
    x0 = ini.array("inventory")
    try:
        return Instance(Network(tuple(mdc), sp, cap, dp), costs, dem, model, s1, x0, dict(data.get("meta", {})))
    except ValueError as e:
        raise InstanceFormatError("initial", str(e)) from None


def load(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InstanceFormatError("<root>", f"not valid JSON: {e}") from None
    return from_dict(data)
