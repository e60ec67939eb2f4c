"""Command-line front end: ``reliefplan {gen,train,evaluate,sweep,report}``.

All randomness derives from ``--seed`` through the stream tags in
:mod:`reliefplan.markov`. Desk-scale defaults (N=500, 120 s per training
run) can be raised to full scale with ``--N 1000 --time-limit 10800``.
The ``sweep`` grid runs its cells in ``RELIEFPLAN_WORKERS`` processes.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .evalstats import MODELS, evaluate, evaluation_scenarios, read_reports, summarize, write_fbar, write_reports
from .instance import InstanceFormatError, generate, load, save
from .lpcore import LpError
from .rolling import METHODS, RollConfig, RollingPolicy
from .sddp import TrainConfig, load_policy, save_policy, train
from .twostage import load_plan, save_plan, train_static_det, train_static_rand

DESK_N = 500
DESK_TIME_LIMIT = 120.0
WORKERS_ENV = "RELIEFPLAN_WORKERS"


class CliError(Exception):
    pass


def _csv_list(cast):
    def parse(text: str):
        try:
            items = [cast(v) for v in text.split(",") if v.strip()]
        except ValueError as err:
            raise argparse.ArgumentTypeError(str(err)) from err
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return items
    return parse


def _models(text: str):
    items = _csv_list(str)(text)
    bad = [m for m in items if m not in MODELS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown model(s) {bad}; choose from {list(MODELS)}")
    return items


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        max_iterations=args.max_iterations,
        time_limit_seconds=args.time_limit,
        stability_epsilon=args.epsilon,
        stability_window=args.window,
        seed=args.seed,
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--time-limit", type=float, default=DESK_TIME_LIMIT, help="seconds per training run")
    p.add_argument("--max-iterations", type=int, default=100_000)
    p.add_argument("--epsilon", type=float, default=1e-5, help="stability test tolerance")
    p.add_argument("--window", type=int, default=500, help="stability test window (iterations)")
    p.add_argument("--scenarios", type=int, default=100, help="sampled scenarios per two-stage model")
    p.add_argument("--rh-method", choices=METHODS, default="lshaped", help="how each rolling look-ahead is solved")


# ------------------------------------------------------------------ train

def _train(model: str, inst, cfg: TrainConfig, k: int, rh_method: str):
    """Trained object for ``model`` plus its training log rows."""
    if model == "cv":
        return None, []
    if model == "famsp":
        pol, log = train(inst, cfg)
        return pol, log.rows()
    if model == "static2ssp":
        fn = train_static_det if inst.kind == "det" else train_static_rand
        plan, log = fn(inst, cfg, k=k)
        return plan, log.rows()
    if model == "rh2ssp":
        return RollingPolicy(inst, RollConfig(cfg, k, cfg.seed, rh_method)), []
    raise CliError(f"unknown model {model!r}")


def _write_log(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "lower_bound", "seconds"])
        for it, lb, sec in rows:
            w.writerow([it, repr(float(lb)), f"{sec:.6f}"])


def cmd_gen(args) -> None:
    inst = generate(args.sps, args.dps, args.nu, args.seed, args.kind, alpha1=args.alpha1)
    save(inst, args.out)
    print(f"wrote {args.out}")


def cmd_train(args) -> None:
    if args.model not in ("famsp", "static2ssp"):
        raise CliError(f"model {args.model!r} has no offline training; evaluate it directly")
    inst = load(args.instance)
    obj, rows = _train(args.model, inst, _train_config(args), args.scenarios, args.rh_method)
    (save_policy if args.model == "famsp" else save_plan)(obj, args.out)
    if args.log:
        _write_log(args.log, rows)
    print(f"wrote {args.out} ({len(rows)} iterations)")


def _load_trained(args, inst):
    if args.model == "cv":
        return None
    if args.model == "rh2ssp":
        cfg = _train_config(args)
        return RollingPolicy(inst, RollConfig(cfg, args.scenarios, args.seed, args.rh_method))
    if not args.policy:
        raise CliError(f"--policy is required for model {args.model!r}")
    if args.model == "famsp":
        return load_policy(args.policy, inst)
    return load_plan(args.policy, inst)


def cmd_evaluate(args) -> None:
    inst = load(args.instance)
    trained = _load_trained(args, inst)
    rep = evaluate(args.model, inst, trained, args.N, args.seed)
    write_reports(args.out, [rep.csv_row(inst, args.seed)])
    if args.fbar:
        write_fbar(args.fbar, rep.fbar)
    print(f"{args.model}: z_hat={rep.z_hat:.4f} +/- {rep.ci_halfwidth:.4f} gap={rep.gap_pct:.3f}%")


# ------------------------------------------------------------------ sweep

@dataclass(frozen=True)
class Cell:
    kind: str
    nu: float
    sps: int
    dps: int
    alpha1: int
    instance_seed: int
    models: tuple
    n_paths: int
    seed: int
    cfg: TrainConfig
    scenarios: int
    rh_method: str
    fbar_dir: str | None


def run_cell(cell: Cell) -> list[dict]:
    """Generate one instance, train and evaluate every requested model on shared paths."""
    inst = generate(cell.sps, cell.dps, cell.nu, cell.instance_seed, cell.kind, alpha1=cell.alpha1)
    scen = evaluation_scenarios(inst, cell.n_paths, cell.seed)
    cv = evaluate("cv", inst, None, scenarios=scen)
    rows = []
    for model in cell.models:
        start = time.perf_counter()
        obj, _ = _train(model, inst, cell.cfg, cell.scenarios, cell.rh_method)
        spent = time.perf_counter() - start
        rep = cv if model == "cv" else evaluate(model, inst, obj, scenarios=scen, cv_costs=cv.costs)
        rep.train_seconds = spent
        rows.append(rep.csv_row(inst, cell.seed))
        if cell.fbar_dir:
            name = f"fbar_{model}_{cell.kind}_nu{cell.nu:g}_I{cell.sps}_J{cell.dps}_a{cell.alpha1}.csv"
            write_fbar(Path(cell.fbar_dir) / name, rep.fbar)
    return rows


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as err:
        raise CliError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from err
    return max(1, n)


def cmd_sweep(args) -> None:
    cfg = _train_config(args)
    if args.fbar_dir:
        Path(args.fbar_dir).mkdir(parents=True, exist_ok=True)
    cells = [
        Cell(kind, nu, sps, dps, a1, args.instance_seed, tuple(args.models), args.N, args.seed, cfg, args.scenarios,
             args.rh_method, args.fbar_dir)
        for kind in args.kind for nu in args.nu for sps in args.sps for dps in args.dps for a1 in args.alpha1
    ]
    workers = _workers()
    if workers == 1:
        results = map(run_cell, cells)
        for rows in results:
            write_reports(args.out, rows)
    else:
        with ProcessPoolExecutor(workers) as pool:
            for rows in pool.map(run_cell, cells):
                write_reports(args.out, rows)
    print(f"appended {len(cells) * len(args.models)} rows to {args.out}")


def cmd_report(args) -> None:
    table = summarize(read_reports(args.input))
    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(table[0]) if table else ["model"])
            w.writeheader()
            w.writerows(table)
    if args.json:
        print(json.dumps(table, indent=2))
        return
    print(f"{'model':<11} {'kind':<5} {'nu':>7} {'n':>3} {'z_hat':>14} {'gap_pct':>9}")
    for r in table:
        print(f"{r['model']:<11} {r['kind']:<5} {r['nu']:>7g} {r['instances']:>3} "
              f"{r['z_hat_mean']:>14.4f} {r['gap_pct_mean']:>9.3f}")


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reliefplan", description="Hurricane relief prepositioning policies.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("--sps", type=int, default=3)
    p.add_argument("--dps", type=int, default=10)
    p.add_argument("--nu", type=float, default=0.6)
    p.add_argument("--kind", choices=("det", "rand"), default="det")
    p.add_argument("--alpha1", type=int, default=1, help="initial intensity level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="instance.json")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an offline policy (famsp) or static plan (static2ssp)")
    p.add_argument("--instance", required=True)
    p.add_argument("--model", choices=("famsp", "static2ssp"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="CSV of iteration, lower bound, seconds")
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate one model out of sample")
    p.add_argument("--instance", required=True)
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--policy", help="trained policy or plan file")
    p.add_argument("--N", type=int, default=DESK_N)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="reports.csv")
    p.add_argument("--fbar", help="CSV of mean procurement per period")
    _add_train_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train and evaluate models over an instance grid")
    p.add_argument("--models", type=_models, default=list(MODELS))
    p.add_argument("--kind", type=_csv_list(str), default=["det", "rand"])
    p.add_argument("--nu", type=_csv_list(float), default=[0.001, 0.6, 5.0])
    p.add_argument("--sps", type=_csv_list(int), default=[3])
    p.add_argument("--dps", type=_csv_list(int), default=[10])
    p.add_argument("--alpha1", type=_csv_list(int), default=[1])
    p.add_argument("--instance-seed", type=int, default=1)
    p.add_argument("--N", type=int, default=DESK_N)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--fbar-dir")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="average sweep rows per model and nu")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "kind", None) and args.command == "sweep":
            bad = [k for k in args.kind if k not in ("det", "rand")]
            if bad:
                raise CliError(f"unknown kind(s) {bad}")
        args.func(args)
    except (CliError, InstanceFormatError, LpError, OSError, ValueError, KeyError, TypeError) as err:
        msg = str(err).splitlines()[0] if str(err) else type(err).__name__
        print(f"reliefplan: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
