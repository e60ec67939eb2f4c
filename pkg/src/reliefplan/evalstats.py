"""Out-of-sample evaluation of relief policies.

Every policy is simulated on the same ``N`` sampled scenarios, drawn from
the streams ``(seed, TAG_EVAL, n)``. Those are disjoint from every
training stream. Costs accrue period by period. On random landfall time
they stop at absorption.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clairvoyant import Scenario, sample_scenario, solve_cv
from .instance import Instance
from .markov import TAG_EVAL, rng_stream
from .rolling import RollingPolicy
from .sddp import OfflinePolicy
from .twostage import StaticPlan, evaluate_static

MODELS = ("cv", "famsp", "static2ssp", "rh2ssp")
Z_95 = 1.96

REPORT_FIELDS = (
    "model", "kind", "nu", "I", "J", "alpha1", "seed", "N",
    "z_hat", "ci_halfwidth", "cv_mean", "gap_pct", "train_seconds", "eval_seconds",
)


# ------------------------------------------------------------- statistics

@dataclass(frozen=True)
class SampleStats:
    mean: float
    std: float
    halfwidth: float
    n: int


def sample_stats(costs) -> SampleStats:
    """Sample mean, unbiased standard deviation and 95% half-width ``1.96 s / sqrt(N)``."""
    a = np.asarray(costs, dtype=float)
    n = a.size
    if n < 1:
        raise ValueError("need at least one cost")
    mean = float(np.sum(a) / n)
    std = float(np.sqrt(np.sum((a - mean) ** 2) / (n - 1))) if n > 1 else 0.0
    return SampleStats(mean, std, Z_95 * std / np.sqrt(n), n)


def gap_pct(z_hat: float, cv_mean: float) -> float:
    """Relative excess over the clairvoyant mean, in percent (NaN when that mean is 0)."""
    return float("nan") if cv_mean == 0 else 100.0 * (z_hat - cv_mean) / cv_mean


# --------------------------------------------------------------- policies

@dataclass(frozen=True, eq=False)
class PathResult:
    cost: float
    procurement: np.ndarray  # units bought from the MDC per period


def _mdc_units(inst: Instance, f: np.ndarray) -> float:
    return float(f[..., inst.arc_from_mdc].sum())


def run_cv(inst: Instance, scen: Scenario) -> PathResult:
    res = solve_cv(inst, scen)
    return PathResult(res.cost, res.f[:, inst.arc_from_mdc].sum(axis=1))


def run_offline(policy: OfflinePolicy, scen: Scenario) -> PathResult:
    """Simulate a trained multistage policy, implementing one stage at a time."""
    inst = policy.inst
    x_prev = np.asarray(inst.initial_inventory, dtype=float)
    buy = np.zeros(inst.horizon)
    cost = 0.0
    for t, xi in enumerate(scen.path, start=1):
        if inst.kind == "rand" and inst.markov.is_absorbing(xi):
            break
        dec = policy.act(t, xi, x_prev, scen.point_index, cold=True)
        cost += dec.immediate_cost
        buy[t - 1] = _mdc_units(inst, dec.f)
        x_prev = dec.x
    return PathResult(cost, buy)


def run_static(plan: StaticPlan, inst: Instance, scen: Scenario) -> PathResult:
    ev = evaluate_static(plan, inst, scen)
    return PathResult(ev.cost, ev.procurement)


def run_rolling(policy: RollingPolicy, scen: Scenario, path: int = 0) -> PathResult:
    out = policy.run(scen, path)
    return PathResult(out.cost, out.procurement(policy.inst))


def policy_runner(model: str, inst: Instance, trained=None):
    """A callable ``(scenario, path index) -> PathResult`` for ``model`` and its trained object."""
    if model == "cv":
        return lambda scen, n: run_cv(inst, scen)
    if trained is None:
        raise ValueError(f"model {model!r} needs a trained policy")
    if model == "famsp":
        if not isinstance(trained, OfflinePolicy):
            raise TypeError("famsp needs an OfflinePolicy")
        if trained.inst.kind != inst.kind:
            raise ValueError("policy kind does not match instance kind")
        return lambda scen, n: run_offline(trained, scen)
    if model == "static2ssp":
        if not isinstance(trained, StaticPlan):
            raise TypeError("static2ssp needs a StaticPlan")
        if trained.kind != inst.kind:
            raise ValueError("plan kind does not match instance kind")
        return lambda scen, n: run_static(trained, inst, scen)
    if model == "rh2ssp":
        if not isinstance(trained, RollingPolicy):
            raise TypeError("rh2ssp needs a RollingPolicy")
        if trained.inst.kind != inst.kind:
            raise ValueError("policy kind does not match instance kind")
        return lambda scen, n: run_rolling(trained, scen, n)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


# ------------------------------------------------------------- evaluation

def evaluation_scenarios(inst: Instance, n_paths: int, seed: int) -> list[Scenario]:
    if n_paths < 1:
        raise ValueError("N must be at least 1")
    return [sample_scenario(inst, rng_stream(seed, TAG_EVAL, n)) for n in range(n_paths)]


@dataclass(eq=False)
class EvalReport:
    model: str
    n_paths: int
    z_hat: float
    sigma_hat: float
    ci_halfwidth: float
    cv_mean: float
    gap_pct: float
    fbar: np.ndarray
    seconds: float
    costs: np.ndarray = field(repr=False)
    cv_costs: np.ndarray = field(repr=False)
    train_seconds: float = 0.0

    def csv_row(self, inst: Instance, seed: int) -> dict:
        m = inst.meta
        return {
            "model": self.model,
            "kind": inst.kind,
            "nu": inst.costs.nu,
            "I": inst.n_sp,
            "J": inst.n_dp,
            "alpha1": m.get("alpha1", inst.initial_state.alpha),
            "seed": seed,
            "N": self.n_paths,
            "z_hat": repr(self.z_hat),
            "ci_halfwidth": repr(self.ci_halfwidth),
            "cv_mean": repr(self.cv_mean),
            "gap_pct": repr(self.gap_pct),
            "train_seconds": f"{self.train_seconds:.3f}",
            "eval_seconds": f"{self.seconds:.3f}",
        }


def evaluate(model: str, inst: Instance, trained=None, n_paths: int = 500, seed: int = 0,
             scenarios: list[Scenario] | None = None, cv_costs=None) -> EvalReport:
    """Simulate ``model`` on ``n_paths`` evaluation scenarios and summarize.

    ``scenarios`` and ``cv_costs`` may be passed in to share them between
    several models evaluated on the same instance.
    """
    start = time.perf_counter()
    scen = evaluation_scenarios(inst, n_paths, seed) if scenarios is None else scenarios
    run = policy_runner(model, inst, trained)
    results = [run(s, n) for n, s in enumerate(scen)]
    costs = np.array([r.cost for r in results])
    if cv_costs is None:
        cv_costs = costs if model == "cv" else np.array([run_cv(inst, s).cost for s in scen])
    cv_costs = np.asarray(cv_costs, dtype=float)
    st = sample_stats(costs)
    cv_mean = float(np.sum(cv_costs) / len(cv_costs))
    fbar = np.sum([r.procurement for r in results], axis=0) / len(results)
    return EvalReport(model, len(scen), st.mean, st.std, st.halfwidth, cv_mean, gap_pct(st.mean, cv_mean), fbar,
                      time.perf_counter() - start, costs, cv_costs)


# -------------------------------------------------------------------- CSV

def write_reports(path, rows, append: bool = True) -> None:
    """Append report rows (dicts keyed by ``REPORT_FIELDS``), writing a header for new files."""
    path = Path(path)
    new = not path.exists() or not append or path.stat().st_size == 0
    with path.open("w" if not append else "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        if new:
            w.writeheader()
        for row in rows:
            w.writerow(row)


def read_reports(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(REPORT_FIELDS) - set(rows[0]) if rows else set()
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return rows


def write_fbar(path, fbar) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "fbar_t"])
        for t, v in enumerate(fbar, start=1):
            w.writerow([t, repr(float(v))])


def read_fbar(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["fbar_t"]) for r in rows])


def summarize(rows) -> list[dict]:
    """Mean ``z_hat`` and ``gap_pct`` per (model, kind, nu), averaged across instances."""
    groups: dict = {}
    for r in rows:
        key = (r["model"], r["kind"], float(r["nu"]))
        groups.setdefault(key, []).append((float(r["z_hat"]), float(r["gap_pct"])))
    out = []
    for (model, kind, nu), vals in sorted(groups.items()):
        z = np.array(vals)
        out.append({"model": model, "kind": kind, "nu": nu, "instances": len(vals),
                    "z_hat_mean": float(z[:, 0].mean()), "gap_pct_mean": float(z[:, 1].mean())})
    return out
