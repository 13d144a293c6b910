import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlcomm.correlations import (
    deterministic_local, i3322_extremal, pairwise_pr_candidate, pr_box,
)
from nlcomm.tasks import (
    TABLE1_TO_CS22, ChannelError, build_cs, build_facet_task,
    build_i3322_task, build_prbox_task, build_table1, channel_from_matrix, default_theta,
    noiseless_channel, r_ijkl, reduce_wire_reading, relation_conditions, relation_witness,
    rijkl_relations, task_from_json, task_to_json, uncovered_routings,
)

from oracles import random_task


@pytest.mark.parametrize("d,k", [(2, 2), (3, 2), (2, 3), (3, 3)])
def test_cs_shape_and_weights(d, k):
    task = build_cs(d, k)
    assert task.sizes == (k ** d, d, k)
    assert task.algebraic_max() == 1
    # each input carries k-1 positive outputs per message, weight 1/k^d each
    assert sum(task.weights.ravel()) == Fraction(d * (k - 1), 1)


def test_cs_weight_zero_exactly_on_image():
    task = build_cs(2, 3)
    for mi, m in enumerate(task.inputs):
        for t, n in itertools.product(range(2), range(3)):
            assert (task.weights[mi, t, n] == 0) == (n + 1 == m[t])


def test_table1_rows_match_cs22_inputs():
    t1, cs = build_table1(), build_cs(2, 2)
    for row, m in TABLE1_TO_CS22.items():
        assert np.array_equal(t1.weights[row - 1], cs.weights[cs.inputs.index(m)])


def test_channel_rejects_non_stochastic():
    with pytest.raises(ChannelError):
        channel_from_matrix([[1, 0], [Fraction(1, 2), Fraction(1, 3)]])
    assert noiseless_channel(3).noiseless
    assert not channel_from_matrix([[Fraction(1, 2)] * 2] * 2).noiseless


def test_relation_membership_and_label():
    R = r_ijkl(1, 3, 2, 1, d=3)
    assert (1, 2) in R and (3, 1) in R and (2, 1) not in R
    with pytest.raises(ValueError):
        r_ijkl(2, 1, 1, 1, d=3)


def test_rijkl_count():
    assert len(rijkl_relations(3)) == 12
    assert len(rijkl_relations(4)) == 24


def test_every_rijkl_relation_has_witness_on_i3322_face():
    ext = [i3322_extremal(1), i3322_extremal(2)]
    for R in rijkl_relations(3):
        hit = relation_witness(R, ext)
        assert hit is not None
        lb, phi = hit
        conds = relation_conditions(R, lb, phi)
        assert conds["cond_i"] and conds["cond_ii"]


def test_no_uncovered_routings_for_prbox_task():
    rels = rijkl_relations(2)
    assert uncovered_routings(rels, [Fraction(1, 4)] * 4, [pr_box(0, 0, 0)]) == []


def test_facet_task_rejects_bad_omega():
    with pytest.raises(ValueError):
        build_facet_task([pr_box(0, 0, 0)], rijkl_relations(2), [Fraction(1, 2)] * 4)


def test_facet_task_rejects_uncovered_routing():
    # a single relation cannot cover every routing function
    with pytest.raises(ValueError):
        build_facet_task([pr_box(0, 0, 0)], [r_ijkl(1, 2, 1, 1, 2)], [1])


def test_facet_task_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        build_facet_task([i3322_extremal(1)], rijkl_relations(2))


def test_prbox_task_rejects_box_without_blocks():
    with pytest.raises(ValueError):
        build_prbox_task(deterministic_local([1, 1], [1, 1], 2, 2))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_prbox_task_shape(d):
    task = build_prbox_task(pairwise_pr_candidate(d))
    assert task.sizes == (2 * d * (d - 1), d, 2)
    assert sum(task.omega) == 1


def test_i3322_task_shape():
    task = build_i3322_task()
    assert task.sizes == (12, 3, 2)
    assert task.omega == (Fraction(1, 12),) * 12
    assert len(task.facet) == 2


def test_reduction_shape_and_penalty():
    task = build_cs(2, 2)
    red = reduce_wire_reading(task)
    M, T, N = task.sizes
    assert red.kind == "plain"
    assert red.weights.shape == (M + T, T * N)
    theta = default_theta(task)
    assert theta > 1
    # guessing any message other than the one fed in is penalised
    assert red.weights[M, N] == -theta and red.weights[M, 0] == 0


def test_reduction_rejects_small_theta_and_noise():
    with pytest.raises(ValueError):
        reduce_wire_reading(build_cs(2, 2), theta=Fraction(1, 2))
    noisy = build_cs(2, 2)
    noisy = type(noisy)("wire_read", noisy.inputs, noisy.outputs,
                        channel_from_matrix([[Fraction(3, 4), Fraction(1, 4)], [0, 1]]),
                        noisy.weights)
    with pytest.raises(ChannelError):
        reduce_wire_reading(noisy)


def test_payoff_of_perfect_behaviour():
    task = build_cs(2, 2)
    M, T, N = task.sizes
    beh = np.zeros((M, T, N), dtype=object)
    for mi, m in enumerate(task.inputs):
        for t in range(T):
            beh[mi, t, 2 - m[t]] = Fraction(1, T)
    assert task.payoff(beh) == 1


@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_task_json_roundtrip(seed, plain):
    rng = np.random.default_rng(seed)
    task = random_task(rng, int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                       plain=plain)
    back = task_from_json(task_to_json(task))
    assert back.kind == task.kind
    assert np.array_equal(back.weights, task.weights)
    assert np.array_equal(back.channel.matrix, task.channel.matrix)


@pytest.mark.parametrize("builder", [lambda: build_cs(2, 2), build_table1, build_i3322_task])
def test_built_task_json_roundtrip(builder):
    task = builder()
    back = task_from_json(task_to_json(task))
    assert back.inputs == task.inputs and back.outputs == task.outputs
    assert back.messages == task.messages
    assert np.array_equal(back.weights, task.weights)
