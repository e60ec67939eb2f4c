import numpy as np
import pytest

from reliefplan.clairvoyant import (
    TreeTooLarge,
    extensive_form_value,
    make_scenario,
    sample_scenario,
    solve_cv,
    solve_cv_det,
    solve_cv_rand,
    tree_value,
)
from reliefplan.instance import generate
from reliefplan.lpcore import solve
from reliefplan.markov import HurricaneState, rng_stream
from reliefplan.network import terminal_cost

from conftest import tiny_instance

TINY_DET_EF = 2991.96866
TINY_RAND_EF = 2154.38595


def test_extensive_form_frozen(tiny_det, tiny_rand):
    assert extensive_form_value(tiny_det) == pytest.approx(TINY_DET_EF, rel=1e-8)
    assert extensive_form_value(tiny_rand) == pytest.approx(TINY_RAND_EF, rel=1e-8)


def test_zero_demand_costs_nothing(tiny_det):
    scen = make_scenario(tiny_det, [HurricaneState(1, 1), HurricaneState(0, 1), HurricaneState(0, 0)], 0)
    res = solve_cv_det(tiny_det, scen)
    assert res.cost == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(res.f, 0.0) and np.allclose(res.y, 0.0)


def test_zero_demand_on_generated_instances():
    for kind in ("det", "rand"):
        inst = generate(3, 10, 0.6, 1, kind)
        path = [inst.initial_state] * inst.horizon
        path[-1] = HurricaneState(0, 1, 7 if kind == "rand" else None)
        scen = make_scenario(inst, path, 0)
        assert scen.demands.sum() == 0.0
        assert solve_cv(inst, scen).cost == pytest.approx(0.0, abs=1e-9)


def test_cv_det_cost_decomposes(tiny_det):
    scen = make_scenario(tiny_det, [HurricaneState(1, 1)] * 3, 0)
    res = solve_cv_det(tiny_det, scen)
    T = tiny_det.horizon
    logistics = sum(
        tiny_det.arc_costs(t) @ res.f[t - 1] + tiny_det.costs.holding * res.x[t - 1].sum() for t in range(1, T + 1)
    )
    total = logistics + terminal_cost(tiny_det, T, res.x[-1], res.y, scen.demands[-1])
    assert res.cost == pytest.approx(total, rel=1e-9)


def test_cv_rand_demand_only_at_landfall(tiny_rand):
    path = [HurricaneState(1, 1, 0), HurricaneState(1, 1, 1), HurricaneState(1, 1, 2)]
    scen = make_scenario(tiny_rand, path, 0)
    assert scen.landfall_period == 2
    assert scen.absorbed_period == 3
    assert scen.last_active_period == 2
    res = solve_cv_rand(tiny_rand, scen)
    assert np.allclose(res.y[0], 0.0)
    assert res.y[1].sum() + res.under[1].sum() == pytest.approx(scen.demands[1].sum())
    assert res.cost >= 0


def test_cv_nonnegative_on_samples():
    for kind in ("det", "rand"):
        inst = generate(3, 10, 0.6, 2, kind)
        for n in range(60):
            assert solve_cv(inst, sample_scenario(inst, rng_stream(9, n))).cost >= -1e-9


def test_backends_agree_on_cv(tiny_det):
    from reliefplan.lpcore import LpBuilder
    from reliefplan.network import Prev, add_period, add_terminal_delivery

    scen = make_scenario(tiny_det, [HurricaneState(1, 1)] * 3, 0)
    b = LpBuilder()
    prev = Prev.const(tiny_det.initial_inventory)
    for t in range(1, 4):
        pv = add_period(b, tiny_det, t, prev)
        prev = Prev.cols(pv.x)
    add_terminal_delivery(b, tiny_det, pv, scen.demands[-1])
    lp = b.build()
    assert solve(lp, "simplex").objective == pytest.approx(solve_cv_det(tiny_det, scen).cost, rel=1e-9)


def test_extensive_form_at_least_clairvoyant_expectation():
    inst = tiny_instance("det")
    cv = 0.0
    for s2, p2 in inst.markov.successors(inst.initial_state):
        for s3, p3 in inst.markov.successors(s2):
            cv += p2 * p3 * solve_cv_det(inst, make_scenario(inst, [inst.initial_state, s2, s3], 0)).cost
    assert cv <= extensive_form_value(inst) + 1e-7


def test_tree_limit():
    inst = generate(3, 10, 0.6, 1, "det")
    with pytest.raises(TreeTooLarge):
        tree_value(inst, 1, [(inst.initial_state, 1.0)], inst.initial_inventory, max_nodes=50)
    with pytest.raises(ValueError):
        tree_value(inst, 1, [(inst.initial_state, 0.5)], inst.initial_inventory)
