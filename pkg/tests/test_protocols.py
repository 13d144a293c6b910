from fractions import Fraction

import numpy as np
import pytest

from nlcomm.bounds import isotropic_threshold
from nlcomm.correlations import (
    all_pr_boxes, deterministic_local, i3322_extremal, isotropic_mix, mix, pairwise_pr_candidate,
    white_noise,
)
from nlcomm.protocols import (
    ProtocolError, common_pr_blocks, cs_facet_protocol, facet_task_protocol, i3322_printed_protocol,
    i3322_protocol, prbox_task_protocol,
)
from nlcomm.tasks import build_cs, build_i3322_task, build_prbox_task, build_table1
from nlcomm.wirecut import bell_from_task, cut_wire, evaluate_bell, simulate_assisted

HALF = Fraction(1, 2)


def i3322_boxes():
    e1, e2 = i3322_extremal(1), i3322_extremal(2)
    return {"e1": e1, "e2": e2, "mid": mix([e1, e2], [HALF, HALF])}


def per_input_payoff(task, proto):
    beh = simulate_assisted(task, proto).behaviour
    return {lab: (task.weights[m] * beh[m]).sum() for m, lab in enumerate(task.inputs)}


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("P", all_pr_boxes(), ids=lambda P: P.label)
def test_cs_facet_protocol_wins(d, P):
    task = build_cs(d, 2)
    assert simulate_assisted(task, cs_facet_protocol(task, P)).payoff == 1


def test_cs_facet_protocol_white_noise_payoff():
    for d, k in [(2, 2), (3, 2)]:
        task = build_cs(d, k)
        proto = cs_facet_protocol(task, all_pr_boxes()[3])
        assert simulate_assisted(task, proto.with_box(white_noise(2, 2, 2, 2))).payoff == Fraction(k - 1, k)


def test_cs_facet_protocol_payoff_equals_cut_box_value():
    task = build_cs(3, 2)
    proto = cs_facet_protocol(task, all_pr_boxes()[5])
    assert evaluate_bell(bell_from_task(task), cut_wire(task, proto)) == 1


def test_cs_facet_protocol_rejects_local_box():
    task = build_cs(2, 2)
    with pytest.raises(ProtocolError):
        cs_facet_protocol(task, deterministic_local([1, 2], [1, 1], 2, 2))


def test_cs_facet_protocol_rejects_other_families():
    with pytest.raises(ProtocolError):
        cs_facet_protocol(build_table1(), all_pr_boxes()[0])


def test_cs_facet_protocol_rejects_too_many_bob_settings():
    with pytest.raises(ProtocolError):
        cs_facet_protocol(build_cs(2, 2), pairwise_pr_candidate(3))


@pytest.mark.parametrize("name", ["e1", "e2", "mid"])
def test_facet_task_protocol_on_i3322_face(name):
    task = build_i3322_task()
    box = i3322_boxes()[name]
    assert simulate_assisted(task, facet_task_protocol(task, box)).payoff == 1


def test_facet_task_protocol_white_noise_and_threshold():
    task = build_i3322_task()
    proto = facet_task_protocol(task, i3322_extremal(1))
    assert simulate_assisted(task, proto.with_box(white_noise(3, 3, 2, 2))).payoff == HALF
    line = isotropic_threshold(task, proto)
    assert line.local_bound == Fraction(3, 4)
    assert line.threshold == HALF


def test_facet_task_protocol_needs_facet():
    with pytest.raises(ProtocolError):
        facet_task_protocol(build_cs(2, 2), all_pr_boxes()[0])


@pytest.mark.parametrize("P", all_pr_boxes(), ids=lambda P: P.label)
def test_prbox_protocol_all_pr_types(P):
    task = build_prbox_task(P)
    proto = prbox_task_protocol(task)
    assert simulate_assisted(task, proto).payoff == 1
    assert simulate_assisted(task, proto.with_box(white_noise(2, 2, 2, 2))).payoff == HALF


@pytest.mark.parametrize("d", [3, 4, 5])
def test_prbox_protocol_pairwise_candidates(d):
    P = pairwise_pr_candidate(d)
    task = build_prbox_task(P)
    proto = prbox_task_protocol(task)
    assert simulate_assisted(task, proto).payoff == 1
    # isotropic line is p + (1 - p)/2
    for p in (Fraction(0), Fraction(1, 3), Fraction(1)):
        noisy = proto.with_box(isotropic_mix(p, P))
        assert simulate_assisted(task, noisy).payoff == HALF + HALF * p


def test_common_blocks_on_i3322_face():
    blocks = common_pr_blocks([i3322_extremal(1), i3322_extremal(2)])
    assert set(blocks) == {(1, 2), (1, 3), (2, 3)}
    for (y1, y2), (x1, x2, bits) in blocks.items():
        assert x1 < x2


@pytest.mark.parametrize("name", ["e1", "e2", "mid"])
def test_i3322_protocol_wins_on_face(name):
    task = build_i3322_task()
    assert simulate_assisted(task, i3322_protocol(task, i3322_boxes()[name])).payoff == 1


def test_printed_i3322_encoding_loses_on_mixed_r12_inputs():
    task = build_i3322_task()
    for box in i3322_boxes().values():
        proto = i3322_printed_protocol(task, box)
        assert simulate_assisted(task, proto).payoff == Fraction(5, 6)
        per = per_input_payoff(task, proto)
        lost = {lab for lab, v in per.items() if v != Fraction(1, 12)}
        assert lost == {((1, 1), (2, 2)), ((1, 2), (2, 1))}
        assert all(per[lab] == 0 for lab in lost)


def test_printed_and_corrected_encodings_share_queries():
    task = build_i3322_task()
    box = i3322_extremal(1)
    a, b = i3322_protocol(task, box), i3322_printed_protocol(task, box)
    assert a.queries == b.queries
    diff = {key[0] for key, t in a.messages.items() if b.messages[key] != t}
    assert diff == {((1, 1), (2, 2)), ((1, 2), (2, 1))}


def test_i3322_protocol_rejects_other_families():
    with pytest.raises(ProtocolError):
        i3322_protocol(build_prbox_task(all_pr_boxes()[0]), all_pr_boxes()[0])


def test_protocol_behaviour_is_normalized():
    task = build_i3322_task()
    sim = simulate_assisted(task, i3322_protocol(task, i3322_extremal(2)))
    assert sim.normalized
    assert np.all(sim.behaviour >= 0)
