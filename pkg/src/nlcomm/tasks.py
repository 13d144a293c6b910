"""Channels and one-way communication tasks (plain and wire-read).

A task stores its payoff weights densely.  Wire-read tasks carry
``weights[m, tau', n]``; plain tasks carry ``weights[m, n]``.  Everything
downstream works with :meth:`Task.wire_weights`, which broadcasts a plain
task over the received message so both kinds share one code path.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .correlations import (Correlation, PhiSets, has_pairwise_pr_blocks, phi_sets,
                           qualifying_settings)
from .rational import ONE, ZERO, frac, frac_array, frac_str, zeros


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Channel:
    """Stochastic matrix T(tau'|tau), indexed ``matrix[tau, tau']``."""
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ChannelError(f"channel matrix must be square, got {m.shape}")
        for i, row in enumerate(m):
            if any(v < 0 for v in row) or sum(row) != 1:
                raise ChannelError(f"row {i + 1} of the channel is not a distribution")
        m.setflags(write=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def noiseless(self) -> bool:
        return bool(np.all(self.matrix == np.eye(self.size, dtype=int)))


def noiseless_channel(size: int) -> Channel:
    m = zeros((size, size))
    for i in range(size):
        m[i, i] = ONE
    return Channel(m)


def channel_from_matrix(rows: Sequence[Sequence[Any]]) -> Channel:
    return Channel(frac_array(rows))


@dataclass(frozen=True)
class Relation:
    d: int
    k: int
    pairs: frozenset

    def __post_init__(self):
        for y, b in self.pairs:
            if not (1 <= y <= self.d and 1 <= b <= self.k):
                raise ValueError(f"pair {(y, b)} outside [{self.d}]x[{self.k}]")

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs

    def label(self) -> tuple:
        return tuple(sorted(self.pairs))


def r_ijkl(i: int, j: int, k: int, l: int, d: int, K: int = 2) -> Relation:
    if not i < j:
        raise ValueError("R_ijkl needs i < j")
    return Relation(d, K, frozenset({(i, k), (j, l)}))


@dataclass(frozen=True, eq=False)
class Task:
    kind: str                       # "wire_read" | "plain"
    inputs: tuple
    outputs: tuple
    channel: Channel
    weights: np.ndarray
    omega: tuple | None = None
    family: str | None = None
    params: dict = field(default_factory=dict)
    messages: tuple | None = None   # labels of T; defaults to 1..|T|
    facet: tuple = ()               # extremal boxes a facet task is bound to

    def __post_init__(self):
        M, T, N = len(self.inputs), self.channel.size, len(self.outputs)
        want = (M, T, N) if self.kind == "wire_read" else (M, N)
        if self.kind not in ("wire_read", "plain"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.weights.shape != want:
            raise ValueError(f"weights shape {self.weights.shape}, expected {want}")
        if self.messages is None:
            object.__setattr__(self, "messages", tuple(range(1, T + 1)))
        self.weights.setflags(write=False)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.inputs), self.channel.size, len(self.outputs)

    def wire_weights(self) -> np.ndarray:
        """Weights as W[m, tau', n] for either kind."""
        if self.kind == "wire_read":
            return self.weights
        M, T, N = self.sizes
        return np.repeat(self.weights[:, None, :], T, axis=1)

    def algebraic_max(self) -> Fraction:
        W = self.wire_weights()
        return sum((max(W[m].ravel()) for m in range(W.shape[0])), ZERO)

    def payoff(self, N_tn: np.ndarray):
        """Payoff of a behaviour N[m, tau', n] (for plain tasks pass N[m, n])."""
        W = self.weights
        return (W * N_tn).sum()


# ---------------------------------------------------------------------------
# concrete families

def build_cs(d: int, k: int) -> Task:
    """Avoid-the-image task: input f in [k]^d, Bob must output n != f(tau')."""
    if d < 2 or k < 2:
        raise ValueError("CS[d,k] needs d, k >= 2")
    inputs = tuple(itertools.product(range(1, k + 1), repeat=d))
    w = Fraction(1, k ** d)
    W = zeros((len(inputs), d, k))
    for mi, m in enumerate(inputs):
        for t in range(d):
            for n in range(k):
                if n + 1 != m[t]:
                    W[mi, t, n] = w
    return Task("wire_read", inputs, tuple(range(1, k + 1)), noiseless_channel(d), W,
                family="cs", params={"d": d, "k": k})


TABLE1_WEIGHTS = [
    # columns (tau', n) = (0,0), (0,1), (1,0), (1,1)
    ["1/4", 0, 0, "1/4"],
    ["1/4", 0, "1/4", 0],
    [0, "1/4", 0, "1/4"],
    [0, "1/4", "1/4", 0],
]
# Table rows re-indexed as CS[2,2] inputs (m1, m2); messages/outputs 0/1 -> 1/2.
TABLE1_TO_CS22 = {1: (2, 1), 2: (2, 2), 3: (1, 1), 4: (1, 2)}


def build_table1() -> Task:
    """The one-bit wire-read example with inputs 1..4 and 0/1 labels."""
    W = frac_array(TABLE1_WEIGHTS).reshape(4, 2, 2)
    return Task("wire_read", (1, 2, 3, 4), (0, 1), noiseless_channel(2), W,
                family="table1", messages=(0, 1))


def relation_conditions(R: Relation, lb: Sequence[int], phi: PhiSets) -> dict[str, bool]:
    """Conditions (i) and (ii) tying a relation to a routing function lb."""
    if len(lb) != R.d or len(phi.lb) != R.d:
        raise ValueError(f"relation on [{R.d}] but lb/phi cover {len(lb)}/{len(phi.lb)} settings")
    cond_i = all(b != lb[y - 1] for y, b in R.pairs)
    cond_ii = True
    for a, ys in phi.per_outcome.items():
        if not phi.union_images(a):
            continue
        if not any(all((y, b) in R.pairs for b in phi.per_outcome_images[(a, y)]) for y in ys):
            cond_ii = False
            break
    return {"cond_i": cond_i, "cond_ii": cond_ii}


def relation_witness(R: Relation, extremals: Sequence[Correlation]):
    """First (lb, PhiSets) under which R satisfies (i) and (ii), else None.

    lb is scanned lexicographically over [k]^d and x* ascending over the
    qualifying settings for that lb.
    """
    for lb in itertools.product(range(1, R.k + 1), repeat=R.d):
        if any(b == lb[y - 1] for y, b in R.pairs):
            continue
        for x in qualifying_settings(extremals, lb):
            phi = phi_sets(extremals, lb, x_star=x)
            if relation_conditions(R, lb, phi)["cond_ii"]:
                return lb, phi
    return None


def uncovered_routings(relations: Sequence[Relation], omega: Sequence,
                       extremals: Sequence[Correlation]) -> list[tuple[int, ...]]:
    """Functions lb with no positive-weight relation satisfying (i)/(ii) for them."""
    d, k = relations[0].d, relations[0].k
    bad = []
    for lb in itertools.product(range(1, k + 1), repeat=d):
        xs = qualifying_settings(extremals, lb)
        ok = False
        for R, w in zip(relations, omega):
            if w <= 0 or any(b == lb[y - 1] for y, b in R.pairs):
                continue
            if any(relation_conditions(R, lb, phi_sets(extremals, lb, x))["cond_ii"] for x in xs):
                ok = True
                break
        if not ok:
            bad.append(lb)
    return bad


def build_facet_task(extremals: Sequence[Correlation], relations: Sequence[Relation],
                     omega: Sequence | None = None, family: str = "facet",
                     params: dict | None = None) -> Task:
    """Relation task bound to the face spanned by ``extremals``.

    Zero-weight relations are dropped.  Every kept relation must satisfy
    (i)/(ii) for some routing function, and every routing function must be
    hit by a positive-weight relation; otherwise ``ValueError``.
    """
    if not relations:
        raise ValueError("need at least one relation")
    d, k = relations[0].d, relations[0].k
    X, Y, A, B = extremals[0].dims
    if Y != d or B != k:
        raise ValueError(f"extremals have (Y, B)=({Y}, {B}) but relations live on [{d}]x[{k}]")
    if omega is None:
        omega = [Fraction(1, len(relations))] * len(relations)
    omega = [frac(w) for w in omega]
    if any(w < 0 for w in omega) or sum(omega) != 1:
        raise ValueError("omega must be a probability vector")
    kept = [(R, w) for R, w in zip(relations, omega) if w > 0]
    for R, _ in kept:
        if relation_witness(R, extremals) is None:
            raise ValueError(f"relation {R.label()} fails conditions (i)/(ii) for every routing")
    bad = uncovered_routings([R for R, _ in kept], [w for _, w in kept], extremals)
    if bad:
        raise ValueError(f"routing functions without a compliant relation: {bad[:4]}")
    W = zeros((len(kept), d, k))
    for mi, (R, w) in enumerate(kept):
        for (y, b) in R.pairs:
            W[mi, y - 1, b - 1] = w
    return Task("wire_read", tuple(R.label() for R, _ in kept), tuple(range(1, k + 1)),
                noiseless_channel(d), W, omega=tuple(w for _, w in kept), family=family,
                params=dict(params or {}, d=d, k=k), facet=tuple(extremals))


def rijkl_relations(d: int) -> list[Relation]:
    return [r_ijkl(i, j, k, l, d)
            for i, j in itertools.combinations(range(1, d + 1), 2)
            for k, l in itertools.product((1, 2), repeat=2)]


def build_prbox_task(pstar: Correlation, d: int | None = None) -> Task:
    """R_ijkl task for a dichotomic box whose Bob-setting pairs all embed PR boxes."""
    d = d if d is not None else pstar.dims[1]
    if pstar.dims[1] != d:
        raise ValueError(f"pstar has {pstar.dims[1]} Bob settings, task needs d={d}")
    if not has_pairwise_pr_blocks(pstar):
        raise ValueError("pstar does not embed a PR box for every pair of Bob settings")
    rels = rijkl_relations(d)
    return build_facet_task([pstar], rels, [Fraction(1, 2 * d * (d - 1))] * len(rels),
                            family="prbox", params={"d": d})


def build_i3322_task() -> Task:
    from .correlations import i3322_extremal
    rels = rijkl_relations(3)
    return build_facet_task([i3322_extremal(1), i3322_extremal(2)], rels,
                            [Fraction(1, 12)] * 12, family="i3322", params={"d": 3})


# ---------------------------------------------------------------------------
# wire-reading reduction

def default_theta(task: Task) -> Fraction:
    W = task.wire_weights()
    return 1 + len(task.inputs) * max(abs(v) for v in W.ravel())


def reduce_wire_reading(task: Task, theta=None) -> Task:
    """Plain task on inputs M + T and outputs T x N with a -theta guessing penalty."""
    if task.kind != "wire_read":
        raise ValueError("reduction applies to wire-read tasks")
    if not task.channel.noiseless:
        raise ChannelError("wire-reading reduction is only defined for noiseless channels")
    W = task.weights
    M, T, N = task.sizes
    theta = default_theta(task) if theta is None else frac(theta)
    floor = sum((max(abs(v) for v in W[m].ravel()) for m in range(M)), ZERO)
    if theta <= floor:
        raise ValueError(f"theta={theta} does not dominate the payoff range {floor}")
    Wt = zeros((M + T, T * N))
    for m in range(M):
        Wt[m] = W[m].reshape(T * N)
    for t_in in range(T):
        for t in range(T):
            for n in range(N):
                if t != t_in:
                    Wt[M + t_in, t * N + n] = -theta
    inputs = tuple(("m", lab) for lab in task.inputs) + tuple(("t", lab) for lab in task.messages)
    outputs = tuple((t, n) for t in task.messages for n in task.outputs)
    return Task("plain", inputs, outputs, task.channel, Wt, family="reduced",
                params={"theta": frac_str(theta), "source": task.family})


# ---------------------------------------------------------------------------
# JSON

def _jlabel(label):
    if isinstance(label, tuple):
        return [_jlabel(v) for v in label]
    return label


def _tlabel(label):
    if isinstance(label, list):
        return tuple(_tlabel(v) for v in label)
    return label


def task_to_json(task: Task) -> dict:
    entries = []
    M, T, N = task.sizes
    W = task.weights
    for idx in np.ndindex(W.shape):
        if W[idx] == 0:
            continue
        e = {"m": _jlabel(task.inputs[idx[0]])}
        if task.kind == "wire_read":
            e["tau_prime"] = _jlabel(task.messages[idx[1]])
        e["n"] = _jlabel(task.outputs[idx[-1]])
        e["w"] = frac_str(W[idx])
        entries.append(e)
    out = {
        "kind": task.kind,
        "inputs": [_jlabel(v) for v in task.inputs],
        "outputs": [_jlabel(v) for v in task.outputs],
        "messages": [_jlabel(v) for v in task.messages],
        "channel": {"size": T, "matrix": [[frac_str(v) for v in row] for row in task.channel.matrix]},
        "weights": entries,
        "omega": ({json.dumps(_jlabel(lab)): frac_str(w) for lab, w in zip(task.inputs, task.omega)}
                  if task.omega else {}),
    }
    if task.family:
        out["family"] = task.family
        out["params"] = {k: v for k, v in task.params.items()}
    return out


def task_from_json(data: dict) -> Task:
    inputs = tuple(_tlabel(v) for v in data["inputs"])
    outputs = tuple(_tlabel(v) for v in data["outputs"])
    channel = channel_from_matrix(data["channel"]["matrix"])
    messages = tuple(_tlabel(v) for v in data.get("messages", range(1, channel.size + 1)))
    key = lambda lab: json.dumps(_jlabel(lab))
    mi = {key(v): i for i, v in enumerate(inputs)}
    ni = {key(v): i for i, v in enumerate(outputs)}
    ti = {key(v): i for i, v in enumerate(messages)}
    kind = data["kind"]
    shape = (len(inputs), channel.size, len(outputs)) if kind == "wire_read" else (len(inputs), len(outputs))
    W = zeros(shape)
    for e in data["weights"]:
        m = mi[key(_tlabel(e["m"]))]
        n = ni[key(_tlabel(e["n"]))]
        if kind == "wire_read":
            W[m, ti[key(_tlabel(e["tau_prime"]))], n] = frac(e["w"])
        else:
            W[m, n] = frac(e["w"])
    omega = None
    if data.get("omega"):
        omega = tuple(frac(data["omega"][key(lab)]) for lab in inputs)
    return Task(kind, inputs, outputs, channel, W, omega=omega, family=data.get("family"),
                params=dict(data.get("params", {})), messages=messages)
