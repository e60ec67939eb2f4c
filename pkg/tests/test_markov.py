import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reliefplan.markov import (
    INTENSITY_MATRIX,
    LX_MATRIX,
    LY_MATRIX,
    AttributeChain,
    HurricaneState,
    Interval,
    MarkovModel,
    StateClass,
    default_ly_chain,
    default_model,
    expected_absorption_steps,
    max_steps_to_absorption,
    n_step_matrix,
    rng_stream,
)


def _ly_absorbing(ly):
    return [i for i, lab in enumerate(ly.labels) if lab.lower >= 0]


def test_expected_absorption_steps_frozen():
    ly = default_ly_chain()
    assert expected_absorption_steps(ly, 0, _ly_absorbing(ly)) == pytest.approx(5.2002, abs=1e-9)


def test_horizons_of_builtin_models():
    assert default_model("det").horizon == 5
    assert default_model("rand").horizon == 8


@pytest.mark.parametrize("matrix", [INTENSITY_MATRIX, LX_MATRIX, LY_MATRIX])
def test_builtin_rows_sum_to_one(matrix):
    assert np.allclose(np.sum(matrix, axis=1), 1.0, atol=1e-6)


def test_two_state_absorption_closed_form():
    # staying with probability p: expected steps 1 / (1 - p)
    chain = AttributeChain((0, 1), [[0.75, 0.25], [0.0, 1.0]])
    assert expected_absorption_steps(chain, 0, [1]) == pytest.approx(4.0, abs=1e-12)
    assert expected_absorption_steps(chain, 1, [1]) == 0.0


def test_unreachable_absorption_is_rejected():
    chain = AttributeChain((0, 1, 2), [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        expected_absorption_steps(chain, 0, [2])


def test_max_steps_needs_forward_chain():
    chain = AttributeChain((0, 1), [[0.5, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        max_steps_to_absorption(chain)


def test_renormalizes_small_rounding_and_rejects_large_errors():
    with pytest.warns(UserWarning):
        c = AttributeChain((0, 1), [[0.5, 0.5000001], [0.0, 1.0]])
    assert c.matrix.sum(axis=1) == pytest.approx([1.0, 1.0], abs=1e-15)
    with pytest.raises(ValueError):
        AttributeChain((0, 1), [[0.5, 0.6], [0.0, 1.0]])
    with pytest.raises(ValueError):
        AttributeChain((0, 1), [[1.2, -0.2], [0.0, 1.0]])
    with pytest.raises(ValueError):
        AttributeChain((0, 1, 2), [[1.0, 0.0], [0.0, 1.0]])


def test_classification_random_kind():
    mk = default_model("rand")
    assert mk.classify(HurricaneState(0, 3, 2)) is StateClass.ABSORBING
    assert mk.classify(HurricaneState(2, 3, 7)) is StateClass.ABSORBING
    assert mk.classify(HurricaneState(2, 3, 6)) is StateClass.TRANSIENT
    assert mk.is_landfall(HurricaneState(2, 3, 6))
    assert not mk.is_landfall(HurricaneState(2, 3, 5))
    assert default_model("det").classify(HurricaneState(1, 1)) is StateClass.NOT_APPLICABLE


def test_absorbing_states_only_reach_absorbing_states():
    mk = default_model("rand")
    for s in mk.states():
        if mk.is_absorbing(s):
            assert all(mk.is_absorbing(s2) for s2, _ in mk.successors(s))


def test_joint_probability_is_product():
    mk = default_model("rand")
    s, s2 = HurricaneState(2, 3, 1), HurricaneState(3, 4, 3)
    expect = INTENSITY_MATRIX[2][3] * LX_MATRIX[3][4] * LY_MATRIX[1][3]
    assert mk.joint_transition_prob(s, s2) == pytest.approx(expect, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 6), st.integers(0, 7))
def test_successor_probabilities_sum_to_one(a, x, y):
    mk = default_model("rand")
    total = sum(p for _, p in mk.successors(HurricaneState(a, x, y)))
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5 * 7 * 8 + 5))
def test_index_roundtrip(k):
    mk = default_model("rand")
    k %= mk.n_states
    assert mk.index(mk.state(k)) == k


def test_index_layout():
    det, rand = default_model("det"), default_model("rand")
    assert det.index(HurricaneState(2, 3)) == 2 * 7 + 3
    assert rand.index(HurricaneState(2, 3, 4)) == (2 * 7 + 3) * 8 + 4


def test_sampling_is_reproducible_and_follows_support():
    mk = default_model("rand")
    s1 = HurricaneState(1, 1, 0)
    p1 = mk.sample_path(s1, 7)
    assert p1 == mk.sample_path(s1, 7)
    assert len(p1) == mk.horizon
    for a, b in zip(p1, p1[1:]):
        assert mk.joint_transition_prob(a, b) > 0


def test_sampled_frequencies_match_transition_row():
    chain = AttributeChain((0, 1, 2), [[0.2, 0.5, 0.3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    lx = AttributeChain((Interval(0, 1),), [[1.0]])
    mk = MarkovModel("det", chain, lx, None, 2)
    rng = rng_stream(3)
    n = 20000
    counts = np.zeros(3)
    for _ in range(n):
        counts[mk.sample_next(HurricaneState(0, 0), rng).alpha] += 1
    # 5 sigma band of a binomial proportion
    assert np.all(np.abs(counts / n - [0.2, 0.5, 0.3]) < 5 * math.sqrt(0.25 / n))


def test_n_step_distribution_matches_matrix_power():
    mk = default_model("det")
    s = HurricaneState(2, 3)
    dist = dict(mk.n_step_distribution(s, 3))
    pa, px = n_step_matrix(mk.alpha, 3)[2], n_step_matrix(mk.lx, 3)[3]
    for s2, p in dist.items():
        assert p == pytest.approx(pa[s2.alpha] * px[s2.lx], rel=1e-12)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


def test_streams_are_distinct():
    a = rng_stream(0, 1, 5).random(4)
    b = rng_stream(0, 2, 5).random(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, rng_stream(0, 1, 5).random(4))
