import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reliefplan.instance import (
    MDC,
    CostModel,
    InstanceFormatError,
    delivery_cost,
    demand,
    from_dict,
    generate,
    landfall_points,
    load,
    procurement_cost,
    save,
    to_dict,
    transport_cost_sp,
)
from reliefplan.markov import HurricaneState

from conftest import tiny_instance


def test_generate_is_pure():
    a = generate(3, 10, 0.6, 1, "det")
    b = generate(3, 10, 0.6, 1, "det")
    assert a == b
    assert generate(3, 10, 0.6, 2, "det") != a


def test_generated_layout():
    inst = generate(4, 7, 0.6, 5, "rand", alpha1=3)
    assert inst.n_sp == 4 and inst.n_dp == 7
    assert inst.initial_state == HurricaneState(3, 1, 0)
    assert np.all(inst.network.capacity > 0)
    assert inst.horizon == 8
    assert len(inst.arcs) == 4 + 4 * 3
    assert inst.arcs[0] == (MDC, 0)


def test_procurement_cost_grows_with_time():
    inst = generate(nu=0.6)
    # h_t = beta (1 + nu (t - 1)) with beta = 5
    assert procurement_cost(inst, 1) == pytest.approx(5.0)
    assert procurement_cost(inst, 3) == pytest.approx(5.0 * 2.2)


def test_transport_cost_frozen():
    inst = tiny_instance(nu=0.5)
    # MDC (100, 400) to SP0 (50, 50): distance sqrt(50^2 + 350^2)
    dist = np.hypot(50.0, 350.0)
    assert transport_cost_sp(inst, MDC, 0, 2) == pytest.approx(0.0038 * 1.5 * dist, rel=1e-12)
    arc = inst.arcs.index((MDC, 0))
    assert inst.arc_costs(2)[arc] == pytest.approx(0.0038 * 1.5 * dist + 5.0 * 1.5, rel=1e-12)
    assert delivery_cost(inst, 0, 0, 1) == pytest.approx(0.0038 * np.hypot(10.0, 70.0), rel=1e-12)


def test_zero_distance_costs_nothing():
    inst = tiny_instance()
    assert transport_cost_sp(inst, 0, 0, 1) == 0.0


def test_landfall_points_are_cell_midpoints():
    inst = tiny_instance(m_points=4)
    pts = landfall_points(inst, 1)
    assert [x for x, _ in pts] == pytest.approx([112.5, 137.5, 162.5, 187.5])
    assert sum(w for _, w in pts) == pytest.approx(1.0)


def test_demand_formula():
    inst = tiny_instance()
    # DP0 at (40, 120), landfall at x = 40: delta = 120
    d = demand(inst, 1, 40.0, 0)
    assert d == pytest.approx(400.0 * (1 - 120.0 / 300.0) * 1 / 1, rel=1e-12)
    # beyond the radius of influence there is no demand
    assert demand(inst, 1, 40.0 + 400.0, 0) == 0.0
    # intensity 0 means no demand
    assert demand(inst, 0, 40.0, 0) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 700), st.integers(0, 5))
def test_demand_bounded(x, alpha):
    inst = generate(3, 10, 0.6, 1)
    d = inst.demand_vector(alpha, x)
    assert np.all(d >= 0)
    assert np.all(d <= inst.demand.d_bar + 1e-9)


def test_cost_model_rejects_bad_values():
    with pytest.raises(ValueError):
        CostModel.from_base(5.0, -0.1)


def test_file_roundtrip(tmp_path):
    inst = generate(3, 10, 5.0, 4, "rand", alpha1=5)
    p = tmp_path / "inst.json"
    save(inst, p)
    back = load(p)
    assert back == inst
    assert back.meta == inst.meta
    save(back, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == p.read_bytes()


def test_file_errors_name_the_key(tmp_path):
    doc = to_dict(generate())
    del doc["network"]["sps"]["capacity"]
    with pytest.raises(InstanceFormatError, match="capacity"):
        from_dict(doc)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"format": "nope"}))
    with pytest.raises(InstanceFormatError):
        load(p)
