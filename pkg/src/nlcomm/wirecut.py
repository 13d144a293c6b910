"""Bell functionals obtained by cutting the classical wire, and assisted protocols.

Cutting the wire turns a task on (M, T, N) into a Bell scenario where Alice
has |M| settings with |T| outcomes and Bob has |T| settings with |N|
outcomes.  Boxes in that scenario are indexed ``[m, tau', tau, n]`` to match
:class:`~nlcomm.correlations.Correlation`'s ``[x, y, a, b]`` layout.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .correlations import (Correlation, SignallingError, check_stochastic,
                           validate, wire_transform)
from .rational import ONE, frac, frac_str, zeros
from .tasks import Channel, Task


@dataclass(frozen=True, eq=False)
class BellFunctional:
    """Coefficients c[x, y, a, b] of sum c * P(a, b | x, y)."""
    coeffs: np.ndarray
    label: str = ""

    def __post_init__(self):
        if self.coeffs.ndim != 4:
            raise ValueError("coefficients must be indexed [x, y, a, b]")
        self.coeffs.setflags(write=False)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.coeffs.shape)

    def as_float(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)


def bell_from_task(task: Task) -> BellFunctional:
    """c[m, tau', tau, n] = w(m, tau', n) * T(tau' | tau)."""
    W = task.wire_weights()               # [m, tau', n]
    Tm = task.channel.matrix              # [tau, tau']
    c = np.einsum("msn,ts->mstn", W, Tm)
    return BellFunctional(np.array(c, dtype=object), label=f"B[{task.family or 'task'}]")


def i3322_functional() -> BellFunctional:
    """I3322 expression with marginals read off at the first setting of the other party."""
    c = zeros((3, 3, 2, 2))
    for b in range(2):
        c[1, 0, 1, b] -= 1          # -P_A(2|2)
    for a in range(2):
        c[0, 0, a, 1] -= 1          # -P_B(2|1)
        c[0, 1, a, 1] -= 2          # -2 P_B(2|2)
    signs = {(1, 1): 1, (1, 2): 1, (2, 1): 1, (2, 2): 1, (1, 3): -1, (2, 3): 1, (3, 1): -1, (3, 2): 1}
    for (x, y), s in signs.items():
        c[x - 1, y - 1, 1, 1] += s
    return BellFunctional(c, label="I3322")


def evaluate_bell(bf: BellFunctional, P: Correlation):
    if bf.dims != P.dims:
        raise ValueError(f"functional on {bf.dims} cannot evaluate a box on {P.dims}")
    if P.exact:
        return (bf.coeffs * P.table).sum()
    return float((bf.as_float() * P.as_float()).sum())


# ---------------------------------------------------------------------------
# assisted protocols

@dataclass(frozen=True, eq=False)
class AssistedProtocol:
    """Stochastic maps around a shared box.

    pre_a[m, x] = p(x|m), post_a[m, a, tau] = p_e(tau|a,m),
    pre_b[tau', y] = p(y|tau'), post_b[tau', b, n] = p_d(n|tau',b).
    """
    box: Correlation
    pre_a: np.ndarray
    post_a: np.ndarray
    pre_b: np.ndarray
    post_b: np.ndarray
    label: str = ""

    def __post_init__(self):
        X, Y, A, B = self.box.dims
        M, T = self.pre_a.shape[0], self.pre_b.shape[0]
        shapes = {"pre_a": (M, X), "post_a": (M, A, T), "pre_b": (T, Y),
                  "post_b": (T, B, self.post_b.shape[-1])}
        for name, want in shapes.items():
            got = getattr(self, name).shape
            if got != want:
                raise ValueError(f"{name} has shape {got}, expected {want}")
        for name in shapes:
            check_stochastic(getattr(self, name), name)

    def with_box(self, box: Correlation) -> "AssistedProtocol":
        if box.dims != self.box.dims:
            raise ValueError("replacement box must keep the same dims")
        return AssistedProtocol(box, self.pre_a, self.post_a, self.pre_b, self.post_b, self.label)


def deterministic_protocol(box: Correlation, M: int, T: int, N: int,
                           fx: Callable[[int], int], ft: Callable[[int, int], int],
                           fy: Callable[[int], int], fn: Callable[[int, int], int],
                           label: str = "") -> AssistedProtocol:
    """Protocol from 1-based functions x=fx(m), tau=ft(m,a), y=fy(tau'), n=fn(tau',b)."""
    X, Y, A, B = box.dims
    pre_a, post_a = zeros((M, X)), zeros((M, A, T))
    pre_b, post_b = zeros((T, Y)), zeros((T, B, N))
    for m in range(1, M + 1):
        pre_a[m - 1, fx(m) - 1] = ONE
        for a in range(1, A + 1):
            post_a[m - 1, a - 1, ft(m, a) - 1] = ONE
    for t in range(1, T + 1):
        pre_b[t - 1, fy(t) - 1] = ONE
        for b in range(1, B + 1):
            post_b[t - 1, b - 1, fn(t, b) - 1] = ONE
    return AssistedProtocol(box, pre_a, post_a, pre_b, post_b, label)


@dataclass(frozen=True)
class SimulationResult:
    behaviour: np.ndarray          # N[m, tau', n] for wire-read, N[m, n] for plain
    payoff: object
    normalized: bool
    unnormalized_inputs: tuple = ()
    totals: tuple = ()             # sum over outputs of N(.|m), per input


def _behaviour(task: Task, proto: AssistedProtocol) -> np.ndarray:
    M, T, N = task.sizes
    if proto.pre_a.shape[0] != M or proto.pre_b.shape[0] != T or proto.post_b.shape[-1] != N:
        raise ValueError(
            f"protocol maps cover (M, T, N)={proto.pre_a.shape[0], proto.pre_b.shape[0], proto.post_b.shape[-1]}, "
            f"task has {(M, T, N)}")
    Q = wire_transform(proto.box, proto.pre_a, proto.post_a, proto.pre_b, proto.post_b)
    Tm = task.channel.matrix if proto.box.exact else np.asarray(task.channel.matrix, dtype=float)
    return np.einsum("mstn,ts->msn", Q.table, Tm)   # [m, tau', n]


def simulate_assisted(task: Task, proto: AssistedProtocol) -> SimulationResult:
    """Behaviour, payoff and normalization of a box-assisted protocol.

    The box may be signalling; then the behaviour can fail to be a
    distribution, which is reported rather than raised.
    """
    Nt = _behaviour(task, proto)
    W = task.wire_weights()
    if proto.box.exact:
        payoff = (W * Nt).sum()
        totals = tuple(Nt[m].sum() for m in range(Nt.shape[0]))
        bad = tuple(task.inputs[m] for m, s in enumerate(totals) if s != 1)
    else:
        payoff = float((np.asarray(W, dtype=float) * Nt).sum())
        totals = tuple(float(Nt[m].sum()) for m in range(Nt.shape[0]))
        bad = tuple(task.inputs[m] for m, s in enumerate(totals) if abs(s - 1) > 1e-9)
    behaviour = Nt if task.kind == "wire_read" else Nt.sum(axis=1)
    return SimulationResult(behaviour, payoff, not bad, bad, totals)


def cut_wire(task: Task, proto: AssistedProtocol) -> Correlation:
    """Box P(tau, n | m, tau') whose Bell value equals the protocol's payoff."""
    report = validate(proto.box)
    if not report.no_signalling:
        raise SignallingError(f"assisting box is signalling: {report.violation}")
    return wire_transform(proto.box, proto.pre_a, proto.post_a, proto.pre_b, proto.post_b)


# ---------------------------------------------------------------------------
# signalling boxes break the behaviour

def signalling_counterexample(P: Correlation):
    """Channel and protocol under which a Bob-to-Alice signalling box overflows.

    Returns ``(task, protocol, x_star)`` such that the total mass of
    N(.|m=x_star) equals sum_a max_y P_A(a|x_star, y) > 1.
    """
    X, Y, A, B = P.dims
    pa = P.table.sum(axis=3)  # [x, y, a]
    x_star = None
    for x in range(X):
        if any(pa[x, y, a] != pa[x, 0, a] for y in range(Y) for a in range(A)):
            x_star = x + 1
            break
    if x_star is None:
        raise ValueError("box does not signal from Bob to Alice")
    y_of = [max(range(Y), key=lambda y: (pa[x_star - 1, y, a], -y)) + 1 for a in range(A)]
    T = max(A, Y)
    ch = zeros((T, T))
    for t in range(1, T + 1):
        ch[t - 1, (y_of[t - 1] if t <= A else 1) - 1] = ONE
    W = zeros((X, B))
    W.fill(Fraction(1, X))
    task = Task("plain", tuple(range(1, X + 1)), tuple(range(1, B + 1)), Channel(ch), W,
                family="signalling_demo")
    proto = deterministic_protocol(
        P, X, T, B,
        fx=lambda m: m, ft=lambda m, a: a,
        fy=lambda t: t if t <= Y else 1, fn=lambda t, b: b,
        label="signalling overflow wiring")
    return task, proto, x_star


# ---------------------------------------------------------------------------
# export

def functional_to_json(bf: BellFunctional, local_bound=None, task: Task | None = None) -> dict:
    X, Y, A, B = bf.dims
    coeffs = []
    for x, y, a, b in itertools.product(range(X), range(Y), range(A), range(B)):
        v = bf.coeffs[x, y, a, b]
        if v != 0:
            coeffs.append({"x": x + 1, "y": y + 1, "a": a + 1, "b": b + 1, "c": frac_str(v)})
    out = {"label": bf.label, "dims": [X, Y, A, B], "coefficients": coeffs}
    if task is not None:
        out["scenario"] = {"alice_settings": "inputs m", "alice_outcomes": "sent tau",
                           "bob_settings": "received tau'", "bob_outcomes": "outputs n"}
    if local_bound is not None:
        out["local_bound"] = frac_str(local_bound)
        out["local_bound_float"] = float(local_bound)
    return out


def functional_from_json(data: dict) -> BellFunctional:
    c = zeros(tuple(data["dims"]))
    for e in data["coefficients"]:
        c[e["x"] - 1, e["y"] - 1, e["a"] - 1, e["b"] - 1] = frac(e["c"])
    return BellFunctional(c, label=data.get("label", ""))


def render_functional(bf: BellFunctional, local_bound=None) -> str:
    """Human-readable inequality, one term per line."""
    X, Y, A, B = bf.dims
    lines = [f"# Bell functional {bf.label} on (X, Y, A, B) = {bf.dims}"]
    for x, y, a, b in itertools.product(range(X), range(Y), range(A), range(B)):
        v = bf.coeffs[x, y, a, b]
        if v != 0:
            sign = "+" if v > 0 else "-"
            lines.append(f"  {sign} {abs(v)} * P({a + 1},{b + 1}|{x + 1},{y + 1})")
    if len(lines) == 1:
        lines.append("  0")
    if local_bound is not None:
        lines.append(f"  <= {local_bound}   (shared-randomness / local bound)")
    return "\n".join(lines) + "\n"
