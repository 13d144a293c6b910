from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlcomm.bounds import (
    BudgetExceeded, closed_form_local_bound, isotropic_threshold, local_bound_decoder_scan,
    local_bound_enumerate, ns_bound_lp, optimal_assisted_payoff,
)
from nlcomm.correlations import (
    deterministic_local, i3322_extremal, pairwise_pr_candidate, pr_box, validate, white_noise,
)
from nlcomm.protocols import cs_facet_protocol
from nlcomm.tasks import (
    build_cs, build_i3322_task, build_prbox_task, build_table1, reduce_wire_reading,
)
from nlcomm.wirecut import BellFunctional, bell_from_task, evaluate_bell, i3322_functional

from oracles import brute_assisted, brute_bell_local, brute_local_bound, random_ns_box, random_task


@given(st.integers(0, 2 ** 32 - 1))
def test_engines_agree_with_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    task = random_task(rng, int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                       plain=bool(rng.integers(0, 2)))
    want = brute_local_bound(task)
    assert local_bound_enumerate(task).value == want
    assert local_bound_decoder_scan(task).value == want


@given(st.integers(0, 2 ** 32 - 1))
def test_functional_engines_agree_with_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    dims = tuple(int(v) for v in rng.integers(1, 4, 2)) + tuple(int(v) for v in rng.integers(2, 4, 2))
    c = np.empty(dims, dtype=object)
    for idx in np.ndindex(dims):
        c[idx] = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
    bf = BellFunctional(c)
    want = brute_bell_local(c)
    assert local_bound_enumerate(bf).value == want
    assert local_bound_decoder_scan(bf).value == want


def test_enumeration_witness_attains_value():
    task = build_cs(2, 3)
    res = local_bound_enumerate(task)
    enc, dec = res.witness["encoding"], res.witness["decoding"]
    W = task.weights
    got = sum(W[m, enc[m] - 1, dec[enc[m] - 1] - 1] for m in range(len(task.inputs)))
    assert got == res.value


def test_enumeration_budget():
    with pytest.raises(BudgetExceeded):
        local_bound_enumerate(build_cs(3, 3), budget=10 ** 4)


def test_parallel_scan_matches_serial():
    task = build_cs(3, 3)
    assert local_bound_decoder_scan(task, jobs=2).value == local_bound_decoder_scan(task).value


@pytest.mark.parametrize("d,k", [(2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (2, 4)])
def test_closed_form_matches_scan(d, k):
    task = build_cs(d, k)
    assert closed_form_local_bound(task).value == local_bound_decoder_scan(task).value


@pytest.mark.parametrize("task", [build_i3322_task(), build_prbox_task(pr_box(0, 0, 0)),
                                  build_prbox_task(pairwise_pr_candidate(3))],
                         ids=["i3322", "prbox2", "prbox3"])
def test_relation_cover_closed_form_matches_scan(task):
    assert closed_form_local_bound(task).value == local_bound_decoder_scan(task).value


def test_table1_has_no_closed_form_but_scans_to_three_quarters():
    task = build_table1()
    assert closed_form_local_bound(task) is None
    # [DERIVED] loop oracle over all 2^4 * 2^2 strategy pairs
    assert brute_local_bound(task) == Fraction(3, 4)
    assert local_bound_decoder_scan(task).value == Fraction(3, 4)


def test_lp_cs22_snaps_to_one_with_ns_witness():
    res = ns_bound_lp(build_cs(2, 2))
    assert res.value == 1
    assert res.residuals["snapped"]
    assert max(res.residuals[k] for k in ("primal", "dual", "gap")) < 1e-7
    assert validate(res.witness).no_signalling


def test_lp_never_below_local_bound():
    rng = np.random.default_rng(11)
    for _ in range(10):
        task = random_task(rng, 3, 2, 2)
        lp = float(ns_bound_lp(task).value)
        assert lp >= float(local_bound_decoder_scan(task).value) - 1e-9


def test_lp_dominates_random_ns_boxes():
    bf = i3322_functional()
    lp = float(ns_bound_lp(bf).value)
    rng = np.random.default_rng(2)
    for _ in range(20):
        assert float(evaluate_bell(bf, random_ns_box(rng, bf.dims))) <= lp + 1e-9


def test_lp_budget():
    with pytest.raises(BudgetExceeded):
        ns_bound_lp(build_cs(2, 2), max_variables=10)


def test_isotropic_line_cs32():
    task = build_cs(3, 2)
    line = isotropic_threshold(task, cs_facet_protocol(task, pr_box(0, 0, 0)))
    assert line.intercept == Fraction(1, 2)
    assert line.payoff(1) == 1
    assert line.threshold == Fraction(3, 4)


@given(st.integers(0, 2 ** 32 - 1))
def test_assisted_optimum_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    task = random_task(rng, int(rng.integers(1, 4)), 2, 2)
    P = random_ns_box(rng, (2, 2, 2, 2))
    assert optimal_assisted_payoff(task, P).value == brute_assisted(task, P)


def test_assisted_optimum_with_local_box_is_local_bound():
    task = build_cs(2, 2)
    P = deterministic_local([1, 1], [1, 1], 2, 2)
    assert optimal_assisted_payoff(task, P).value == Fraction(3, 4)


def test_assisted_table1_with_pr_reaches_one():
    assert optimal_assisted_payoff(build_table1(), pr_box(0, 0, 0)).value == 1


def test_assisted_budget():
    with pytest.raises(BudgetExceeded):
        optimal_assisted_payoff(reduce_wire_reading(build_cs(2, 2)), pr_box(0, 0, 0), budget=1000)


def test_reduced_task_white_noise_equals_local_bound():
    # [DERIVED] reduced CS[2,2] optimum with white noise is the shared-randomness value 3/4
    red = reduce_wire_reading(build_cs(2, 2))
    assert optimal_assisted_payoff(red, white_noise(2, 2, 2, 2)).value == Fraction(3, 4)


def test_bound_result_json():
    out = local_bound_decoder_scan(build_cs(2, 2)).to_json()
    assert out["value"] == "3/4" and out["method"] == "decoder_scan"
    lp = ns_bound_lp(i3322_functional()).to_json()
    assert lp["value"] == "1/1" and "residuals" in lp


def test_i3322_extremals_saturate_lp():
    bf = i3322_functional()
    assert all(evaluate_bell(bf, i3322_extremal(w)) == ns_bound_lp(bf).value for w in (1, 2))


def test_bell_from_task_local_bound_matches_task_bound():
    task = build_cs(2, 3)
    assert local_bound_enumerate(bell_from_task(task)).value == local_bound_decoder_scan(task).value
