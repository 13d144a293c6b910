"""Explicit box-assisted protocols that reach payoff 1 on the facet tasks.

Every constructor returns a :class:`FacetProtocol`, an
:class:`~nlcomm.wirecut.AssistedProtocol` that also records the query
``x_m`` and the message ``y_(m, a)`` chosen for each input.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .correlations import (Correlation, Lemma2Violation, _sub_box, phi_sets, pr_box)
from .tasks import Task, relation_witness
from .wirecut import AssistedProtocol, deterministic_protocol


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FacetProtocol(AssistedProtocol):
    queries: dict = field(default_factory=dict)     # input label -> x_m
    messages: dict = field(default_factory=dict)    # (input label, a) -> tau
    routing: dict = field(default_factory=dict)     # input label -> PhiSets or PR block used


def _build(task: Task, box: Correlation, queries: dict, messages: dict, routing: dict,
           label: str) -> FacetProtocol:
    M, T, N = task.sizes
    X, Y, A, B = box.dims
    if B > N:
        raise ProtocolError(f"box has {B} outcomes for Bob but the task only {N} outputs")
    base = deterministic_protocol(
        box, M, T, N,
        fx=lambda m: queries[task.inputs[m - 1]],
        ft=lambda m, a: messages[(task.inputs[m - 1], a)],
        fy=lambda t: t if t <= Y else 1,
        fn=lambda t, b: b,
    )
    return FacetProtocol(box, base.pre_a, base.post_a, base.pre_b, base.post_b, label,
                         queries, messages, routing)


def cs_facet_protocol(task: Task, p_nl: Correlation) -> FacetProtocol:
    """Avoid-the-image protocol: route through settings where the forbidden output has zero weight.

    Input m induces lb(y) = m_y on Bob's settings.  Alice queries the
    smallest qualifying x_m, and on outcome a sends the smallest y in the
    matching Phi-set; Bob queries the received y and outputs his outcome.
    """
    if task.family != "cs":
        raise ProtocolError("cs_facet_protocol needs a CS[d,k] task")
    Y = p_nl.dims[1]
    if Y > task.params["d"]:
        raise ProtocolError(f"box has {Y} Bob settings, more than the d={task.params['d']} messages")
    queries, messages, routing = {}, {}, {}
    for m in task.inputs:
        lb = tuple(m[:Y])
        try:
            phi = phi_sets([p_nl], lb)
        except Lemma2Violation as exc:
            raise ProtocolError(f"box is not on a non-local facet (no Phi-set witness for lb={lb})") from exc
        queries[m] = phi.x_star
        routing[m] = phi
        for a, ys in phi.per_outcome.items():
            messages[(m, a)] = min(ys)
    return _build(task, p_nl, queries, messages, routing, "cs facet protocol")


def facet_task_protocol(task: Task, p_nl: Correlation) -> FacetProtocol:
    """Relation-task protocol driven by each relation's (lb, Phi-set) witness.

    Message 1 is sent for outcomes whose Phi-set images are all empty.
    """
    if not task.facet:
        raise ProtocolError("task is not bound to a facet")
    queries, messages, routing = {}, {}, {}
    for lab in task.inputs:
        R = _relation_of(task, lab)
        found = relation_witness(R, task.facet)
        if found is None:
            raise ProtocolError(f"relation {lab} fails conditions (i)/(ii)")
        lb, phi = found
        queries[lab] = phi.x_star
        routing[lab] = phi
        for a, ys in phi.per_outcome.items():
            if not phi.union_images(a):
                messages[(lab, a)] = 1
                continue
            messages[(lab, a)] = min(
                y for y in ys if all((y, b) in R.pairs for b in phi.per_outcome_images[(a, y)]))
    return _build(task, p_nl, queries, messages, routing, "facet task protocol")


def _relation_of(task: Task, lab):
    from .tasks import Relation
    return Relation(task.params["d"], task.params["k"], frozenset(tuple(p) for p in lab))


# ---------------------------------------------------------------------------
# closed-form PR-block protocols for the R_ijkl tasks

def common_pr_blocks(extremals: Sequence[Correlation]) -> dict:
    """For each Bob pair, the first Alice pair whose sub-box is one PR box in every extremal."""
    X, Y, A, B = extremals[0].dims
    boxes = {bits: pr_box(*bits) for bits in itertools.product((0, 1), repeat=3)}
    out = {}
    for y1, y2 in itertools.combinations(range(Y), 2):
        for x1, x2 in itertools.combinations(range(X), 2):
            subs = {_sub_box(P, (x1, x2), (y1, y2)) for P in extremals}
            if len(subs) != 1:
                continue
            sub = subs.pop()
            bits = next((b for b, box in boxes.items() if box == sub), None)
            if bits is not None:
                out[(y1 + 1, y2 + 1)] = (x1 + 1, x2 + 1, bits)
                break
        else:
            raise ProtocolError(f"no shared PR block for Bob settings ({y1 + 1}, {y2 + 1})")
    return out


def _pr_relabel_rule(block, k: int, l: int):
    """Query and outcome-to-message map on a PR(alpha, beta, gamma) block.

    With block-local bits, Bob's outcome on the first setting is
    a0 + alpha*x0 + gamma, so sending i when that equals k-1 is right; the
    complementary branch lands on j and is right when x0 = 1+k0+l0+beta.
    """
    x1, x2, (alpha, beta, gamma) = block
    k0, l0 = k - 1, l - 1
    x0 = 1 ^ k0 ^ l0 ^ beta
    send_i_on = k0 ^ (alpha & x0) ^ gamma
    return (x2 if x0 else x1), (lambda a: "i" if (a - 1) == send_i_on else "j")


def prbox_task_protocol(task: Task, pstar: Correlation | None = None) -> FacetProtocol:
    """Payoff-1 protocol for an R_ijkl task using the PR block of each Bob pair."""
    if not task.facet:
        raise ProtocolError("task is not bound to a facet")
    box = pstar if pstar is not None else task.facet[0]
    blocks = common_pr_blocks(task.facet)
    queries, messages, routing = {}, {}, {}
    for lab in task.inputs:
        (i, k), (j, l) = lab
        if (i, j) not in blocks:
            raise ProtocolError(f"no PR block recorded for Bob pair {(i, j)}")
        x, rule = _pr_relabel_rule(blocks[(i, j)], k, l)
        queries[lab] = x
        routing[lab] = blocks[(i, j)]
        for a in (1, 2):
            messages[(lab, a)] = i if rule(a) == "i" else j
    return _build(task, box, queries, messages, routing, "PR-block protocol")


def i3322_protocol(task: Task, box: Correlation) -> FacetProtocol:
    """Payoff-1 protocol for the I3322 relation task (blocks shared by both extremals)."""
    if task.family != "i3322":
        raise ProtocolError("i3322_protocol needs the I3322 relation task")
    return prbox_task_protocol(task, box)


def i3322_printed_protocol(task: Task, box: Correlation) -> FacetProtocol:
    """Encoding as commonly printed for the I3322 task.

    It differs from :func:`i3322_protocol` only on R_12kl with k != l,
    where it sends message 2 on outcome 1 and loses that input's weight.
    Kept to document the discrepancy.
    """
    queries, messages = {}, {}
    for lab in task.inputs:
        (i, k), (j, l) = lab
        if (i, j) == (1, 2):
            queries[lab] = 3 if k == l else 1
            for a in (1, 2):
                messages[(lab, a)] = (2 if a == 1 else 1) if k == 1 else a
        else:
            queries[lab] = 1 if k == l else 2
            for a in (1, 2):
                if k == 1:
                    messages[(lab, a)] = i if a == 1 else j
                else:
                    messages[(lab, a)] = j if a == 1 else i
    return _build(task, box, queries, messages, {}, "printed I3322 encoding")
