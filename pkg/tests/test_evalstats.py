import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reliefplan.evalstats import (
    REPORT_FIELDS,
    evaluate,
    evaluation_scenarios,
    gap_pct,
    policy_runner,
    read_fbar,
    read_reports,
    sample_stats,
    summarize,
    write_fbar,
    write_reports,
)
from reliefplan.instance import generate
from reliefplan.rolling import RollConfig, RollingPolicy
from reliefplan.sddp import TrainConfig
from reliefplan.twostage import train_static_det

from conftest import tiny_instance


def test_three_point_statistics():
    st_ = sample_stats([1.0, 2.0, 3.0])
    assert st_.mean == pytest.approx(2.0, abs=1e-12)
    assert st_.std == pytest.approx(1.0, abs=1e-12)
    assert st_.halfwidth == pytest.approx(1.96 / math.sqrt(3), abs=1e-12)
    assert st_.halfwidth == pytest.approx(1.1316065, abs=1e-7)


def test_statistics_edge_cases():
    assert sample_stats([4.0]).halfwidth == 0.0
    with pytest.raises(ValueError):
        sample_stats([])
    assert gap_pct(110.0, 100.0) == pytest.approx(10.0)
    assert math.isnan(gap_pct(1.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=40))
def test_statistics_match_numpy(xs):
    s = sample_stats(xs)
    assert s.mean == pytest.approx(np.mean(xs), abs=1e-8)
    assert s.std == pytest.approx(np.std(xs, ddof=1), abs=1e-8)


def test_clairvoyant_gap_is_zero():
    inst = generate(3, 10, 0.6, 1, "rand")
    rep = evaluate("cv", inst, n_paths=40, seed=1)
    assert rep.gap_pct == 0.0
    assert np.array_equal(rep.costs, rep.cv_costs)


def test_single_path_fbar_is_its_procurement():
    inst = generate(3, 10, 0.6, 1, "det")
    rep = evaluate("cv", inst, n_paths=1, seed=3)
    from reliefplan.evalstats import run_cv

    scen = evaluation_scenarios(inst, 1, 3)[0]
    assert np.allclose(rep.fbar, run_cv(inst, scen).procurement)
    assert rep.fbar.shape == (inst.horizon,)
    assert rep.ci_halfwidth == 0.0


def test_reports_are_byte_identical(tmp_path):
    inst = generate(3, 10, 0.6, 1, "det")
    plan, _ = train_static_det(inst, TrainConfig())
    paths = []
    for k in range(2):
        rep = evaluate("static2ssp", inst, plan, n_paths=30, seed=7)
        row = rep.csv_row(inst, 7)
        row["eval_seconds"] = row["train_seconds"] = "0"
        p = tmp_path / f"r{k}.csv"
        write_reports(p, [row])
        write_fbar(tmp_path / f"f{k}.csv", rep.fbar)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert (tmp_path / "f0.csv").read_bytes() == (tmp_path / "f1.csv").read_bytes()


def test_csv_roundtrip_and_summary(tmp_path):
    inst = generate(3, 10, 0.6, 1, "det")
    rep = evaluate("cv", inst, n_paths=10, seed=0)
    p = tmp_path / "r.csv"
    write_reports(p, [rep.csv_row(inst, 0)])
    write_reports(p, [rep.csv_row(inst, 1)])
    rows = read_reports(p)
    assert len(rows) == 2 and tuple(rows[0]) == REPORT_FIELDS
    assert float(rows[0]["z_hat"]) == rep.z_hat
    summ = summarize(rows)
    assert len(summ) == 1 and summ[0]["instances"] == 2
    assert summ[0]["z_hat_mean"] == pytest.approx(rep.z_hat)
    write_fbar(tmp_path / "f.csv", rep.fbar)
    assert np.array_equal(read_fbar(tmp_path / "f.csv"), rep.fbar)


def test_shared_scenarios_give_paired_comparisons():
    inst = generate(3, 10, 0.6, 1, "det")
    scen = evaluation_scenarios(inst, 20, 2)
    cv = evaluate("cv", inst, scenarios=scen)
    rh = evaluate("rh2ssp", inst, RollingPolicy(inst, RollConfig(method="extensive", scenarios=20)),
                  scenarios=scen, cv_costs=cv.costs)
    assert rh.cv_mean == cv.z_hat
    assert np.all(rh.costs >= cv.costs - 1e-6)


def test_runner_rejects_mismatches():
    det, rand = tiny_instance("det"), tiny_instance("rand")
    plan, _ = train_static_det(det, TrainConfig())
    with pytest.raises(ValueError):
        policy_runner("static2ssp", rand, plan)
    with pytest.raises(TypeError):
        policy_runner("famsp", det, plan)
    with pytest.raises(ValueError):
        policy_runner("famsp", det)
    with pytest.raises(ValueError):
        policy_runner("oracle", det, plan)
    with pytest.raises(ValueError):
        evaluation_scenarios(det, 0, 0)


def test_offline_policy_reports_are_reproducible():
    from reliefplan.sddp import train

    inst = tiny_instance("rand")
    policy, _ = train(inst, TrainConfig(max_iterations=40, stability_window=10))
    a = evaluate("famsp", inst, policy, n_paths=30, seed=4)
    b = evaluate("famsp", inst, policy, n_paths=30, seed=4)
    assert np.array_equal(a.costs, b.costs)
