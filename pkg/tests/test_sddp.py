import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reliefplan.clairvoyant import extensive_form_value, tree_value
from reliefplan.lpcore import solve
from reliefplan.markov import HurricaneState
from reliefplan.sddp import (
    Cut,
    CutPool,
    TrainConfig,
    ZeroStage,
    build_stage_det,
    build_stage_rand,
    load_policy,
    save_policy,
    stable,
    train,
)

from conftest import tiny_instance

FAST = TrainConfig(max_iterations=400, stability_window=50)


@pytest.fixture(scope="module")
def trained_det():
    inst = tiny_instance("det")
    return inst, *train(inst, FAST)


@pytest.fixture(scope="module")
def trained_rand():
    inst = tiny_instance("rand")
    return inst, *train(inst, FAST)


def test_stability_rule():
    assert not stable([1.0, 2.0], 1e-5, 2)
    assert stable([1.0, 2.0, 2.0, 2.0], 1e-5, 2)
    assert not stable([1.0, 1.0, 1.5], 1e-5, 1)
    # bounds that decrease can only happen with numerical noise; they count as stable
    assert stable([5.0, 4.0], 1e-5, 1)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(stability_epsilon=0.0)
    with pytest.raises(ValueError):
        TrainConfig(max_iterations=0)


def test_cut_pool_value():
    pool = CutPool(lower_bound=-1.0)
    assert pool.value(2, 7, np.zeros(2)) == -1.0
    pool.add(2, 7, Cut(np.array([1.0, 2.0]), 3.0))
    pool.add(2, 7, Cut(np.array([-1.0, 0.0]), 0.0))
    assert pool.value(2, 7, np.array([1.0, 1.0])) == pytest.approx(6.0)
    assert len(pool) == 2


@pytest.mark.parametrize("fixture,ef", [("trained_det", 2991.96866), ("trained_rand", 2154.38595)])
def test_lower_bound_reaches_extensive_form(request, fixture, ef):
    inst, policy, log = request.getfixturevalue(fixture)
    assert log.lower_bounds[-1] == pytest.approx(extensive_form_value(inst), rel=1e-4)
    assert log.lower_bounds[-1] == pytest.approx(ef, rel=1e-4)


@pytest.mark.parametrize("fixture", ["trained_det", "trained_rand"])
def test_lower_bounds_monotone(request, fixture):
    _, _, log = request.getfixturevalue(fixture)
    assert np.all(np.diff(log.lower_bounds) >= -1e-9)
    assert log.stop_reason == "stable"


@pytest.mark.parametrize("fixture", ["trained_det", "trained_rand"])
def test_cuts_underestimate_exact_recourse(request, fixture):
    inst, policy, _ = request.getfixturevalue(fixture)
    mk = inst.markov
    rng = np.random.default_rng(0)
    for (t, k), cuts in policy.pool.items():
        xi = mk.state(k)
        roots = mk.successors(xi)
        for _ in range(3):
            x = rng.uniform(0, inst.network.capacity)
            exact = tree_value(inst, t + 1, roots, x)
            assert max(c.value(x) for c in cuts) <= exact + 1e-6 * (1 + abs(exact))


def test_stage_builders(tiny_det, tiny_rand):
    lp = build_stage_det(tiny_det, 1, tiny_det.initial_state, np.zeros(2))
    assert solve(lp).objective == pytest.approx(0.0)  # theta >= 0, nothing forces activity
    absorbed = HurricaneState(0, 1, 1)
    assert isinstance(build_stage_rand(tiny_rand, 2, absorbed, np.zeros(2)), ZeroStage)


def test_terminal_stage_is_the_landfall_problem(tiny_det):
    from reliefplan.clairvoyant import make_scenario, solve_cv_det

    s = HurricaneState(1, 1)
    d = tiny_det.outcome_demand(s, 0)
    lp = build_stage_det(tiny_det, 3, s, np.zeros(2), demand=d)
    # starting from empty SPs only period 3 can act, like the clairvoyant with idle periods 1 and 2
    cv = solve_cv_det(tiny_det, make_scenario(tiny_det, [s, s, s], 0))
    assert solve(lp).objective >= cv.cost - 1e-9


def test_policy_file_roundtrip(tmp_path, trained_rand):
    inst, policy, _ = trained_rand
    p = tmp_path / "policy.json"
    save_policy(policy, p)
    back = load_policy(p, inst)
    assert back.lower_bound() == pytest.approx(policy.lower_bound(), rel=1e-12)
    with pytest.raises(ValueError):
        load_policy(p, tiny_instance("det"))


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 300), st.floats(0, 200))
def test_expected_value_is_convex_along_segments(a, b):
    inst = tiny_instance("det")
    policy, _ = train(inst, TrainConfig(max_iterations=30, stability_window=10))
    x0, x1 = np.zeros(2), np.array([a, b])
    f = lambda x: policy.expected_value(2, HurricaneState(1, 1), x)[0]  # noqa: E731
    mid = 0.5 * (x0 + x1)
    assert f(mid) <= 0.5 * (f(x0) + f(x1)) + 1e-6
