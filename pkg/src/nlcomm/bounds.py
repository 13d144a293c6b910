"""Shared-randomness, closed-form and no-signalling bounds on task payoffs.

Local bounds are exact.  Both local engines work on the integer-scaled
coefficient tensor c[x, y, a, b] of a Bell functional; for a task this is
the wire-cut functional, so Alice's outcome is the sent message, Bob's
setting the received one, and a deterministic strategy is a pair
(encoding E: M -> T, decoding D: T -> N).
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .correlations import Correlation, white_noise, validate
from .rational import frac, frac_str, lcm_denominator, snap
from .tasks import Task
from .wirecut import AssistedProtocol, BellFunctional, bell_from_task, simulate_assisted

ENUMERATION_BUDGET = 10 ** 8
LP_VARIABLE_BUDGET = 10 ** 5
ASSISTED_BUDGET = 3 * 10 ** 5
_CHUNK = 1 << 20


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundResult:
    value: Any                      # Fraction, or float for an unsnapped LP optimum
    method: str                     # enumeration | decoder_scan | closed_form | lp | assisted_enumeration
    witness: Any = None
    residuals: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"method": self.method, "value_float": float(self.value)}
        out["value"] = frac_str(self.value) if isinstance(self.value, Fraction) else repr(float(self.value))
        if isinstance(self.witness, dict):
            out["witness"] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.witness.items()}
        elif isinstance(self.witness, Correlation):
            from .correlations import to_json
            out["witness"] = to_json(self.witness) if self.witness.exact else self.witness.as_float().tolist()
        if self.residuals:
            out["residuals"] = dict(self.residuals)
        return out


# ---------------------------------------------------------------------------
# integer scaling

def _scaled(bf: BellFunctional) -> tuple[np.ndarray, int]:
    """Integer coefficient tensor and its common denominator."""
    den = lcm_denominator(bf.coeffs.ravel())
    ints = np.vectorize(lambda v: int(v * den), otypes=[object])(bf.coeffs)
    X, Y = bf.dims[:2]
    peak = max((abs(v) for v in ints.ravel()), default=0) * X * Y
    if peak < 2 ** 62:
        ints = ints.astype(np.int64)
    return ints, den


def _as_functional(obj) -> tuple[BellFunctional, bool]:
    if isinstance(obj, Task):
        return bell_from_task(obj), True
    if isinstance(obj, BellFunctional):
        return obj, False
    raise TypeError(f"expected a Task or BellFunctional, got {type(obj).__name__}")


def _witness(is_task: bool, alice, bob) -> dict:
    alice = tuple(int(v) + 1 for v in alice)
    bob = tuple(int(v) + 1 for v in bob)
    if is_task:
        return {"encoding": alice, "decoding": bob}
    return {"alice": alice, "bob": bob}


def _gains(C: np.ndarray, bobs: np.ndarray) -> np.ndarray:
    """G[batch, x, a] = sum_y C[x, y, a, bob[batch, y]]."""
    X, Y, A, B = C.shape
    ys = np.arange(Y)
    sel = C[:, ys[None, :], :, bobs]          # [batch, Y, X, A] after advanced indexing
    return sel.sum(axis=1)


def _bob_strategies(Y: int, B: int, start: int, stop: int) -> np.ndarray:
    """Rows of the lexicographic enumeration of [B]^Y (0-based) in [start, stop)."""
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), Y), dtype=np.int64)
    for pos in range(Y - 1, -1, -1):
        out[:, pos] = idx % B
        idx //= B
    return out


# ---------------------------------------------------------------------------
# full enumeration

def _alice_best_enumerated(G: np.ndarray):
    """Max over all a: [X] -> [A] of sum_x G[x, a(x)], lexicographically first argmax."""
    X, A = G.shape
    tail = X
    while tail > 0 and A ** tail > _CHUNK:
        tail -= 1
    head = X - tail
    best, arg = None, None
    for prefix in itertools.product(range(A), repeat=head):
        base = sum(G[x, prefix[x]] for x in range(head)) if head else 0
        tot = np.zeros((1,), dtype=G.dtype) + base
        for x in range(head, X):
            tot = (tot[:, None] + G[x][None, :]).reshape(-1)
        i = int(np.argmax(tot))
        if best is None or tot[i] > best:
            best = tot[i]
            rest = []
            for x in range(X - 1, head - 1, -1):
                rest.append(i % A)
                i //= A
            arg = tuple(prefix) + tuple(reversed(rest))
    return best, arg


def _enumerate_range(C, start, stop):
    X, Y, A, B = C.shape
    best, arg = None, None
    for s in range(start, stop, 256):
        bobs = _bob_strategies(Y, B, s, min(stop, s + 256))
        gains = _gains(C, bobs)
        for j in range(len(bobs)):
            v, alice = _alice_best_enumerated(gains[j])
            if best is None or v > best:
                best, arg = v, (alice, tuple(bobs[j]))
    return best, arg


def _split(total: int, jobs: int):
    step = -(-total // jobs)
    return [(s, min(total, s + step)) for s in range(0, total, step)]


def _reduce(parts):
    best, arg = None, None
    for v, a in parts:               # parts arrive in strategy order, so ties keep the first
        if best is None or v > best:
            best, arg = v, a
    return best, arg


def _run(fn, C, total, jobs):
    if jobs <= 1 or total < 2 * jobs:
        return fn(C, 0, total)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, C, s, e) for s, e in _split(total, jobs)]
        return _reduce(f.result() for f in futures)


def local_bound_enumerate(obj, budget: int = ENUMERATION_BUDGET, jobs: int = 1) -> BoundResult:
    """Exact maximum over every deterministic strategy pair.

    The witness is the lexicographically smallest optimum, ordered by Bob's
    map first and Alice's second.
    """
    bf, is_task = _as_functional(obj)
    X, Y, A, B = bf.dims
    count = A ** X * B ** Y
    if count > budget:
        raise BudgetExceeded(
            f"{count} deterministic strategies exceed the budget {budget}; use local_bound_decoder_scan")
    C, den = _scaled(bf)
    best, (alice, bob) = _run(_enumerate_range, C, B ** Y, jobs)
    return BoundResult(Fraction(int(best), den), "enumeration", _witness(is_task, alice, bob),
                       {"strategies": count})


# ---------------------------------------------------------------------------
# decoder scan

def _scan_range(C, start, stop):
    X, Y, A, B = C.shape
    batch = max(1, min(4096, 10 ** 7 // max(1, X * Y * A)))
    best, arg = None, None
    for s in range(start, stop, batch):
        bobs = _bob_strategies(Y, B, s, min(stop, s + batch))
        gains = _gains(C, bobs)                   # [batch, X, A]
        vals = gains.max(axis=2).sum(axis=1)
        j = int(np.argmax(vals))
        if best is None or vals[j] > best:
            best = vals[j]
            arg = (tuple(np.argmax(gains[j], axis=1)), tuple(bobs[j]))
    return best, arg


def local_bound_decoder_scan(obj, jobs: int = 1) -> BoundResult:
    """max over D of sum_m max_tau sum_tau' T(tau'|tau) w(m, tau', D(tau')), exactly.

    For a fixed decoding each input's best message can be chosen
    independently, so only decodings are enumerated.
    """
    bf, is_task = _as_functional(obj)
    X, Y, A, B = bf.dims
    C, den = _scaled(bf)
    best, (alice, bob) = _run(_scan_range, C, B ** Y, jobs)
    return BoundResult(Fraction(int(best), den), "decoder_scan", _witness(is_task, alice, bob),
                       {"decodings": B ** Y})


# ---------------------------------------------------------------------------
# closed forms

def _relation_cover_bound(task: Task) -> Fraction:
    """max over D of the total weight of relations containing some (y, D(y))."""
    d, k = task.params["d"], task.params["k"]
    best = None
    for D in itertools.product(range(1, k + 1), repeat=d):
        hit = {(y, D[y - 1]) for y in range(1, d + 1)}
        v = sum((w for lab, w in zip(task.inputs, task.omega) if hit & set(lab)), Fraction(0))
        if best is None or v > best:
            best = v
    return best


def closed_form_local_bound(task: Task) -> BoundResult | None:
    if task.family == "cs":
        d, k = task.params["d"], task.params["k"]
        return BoundResult(1 - Fraction(1, k ** d), "closed_form", {"formula": "1 - 1/k^d"})
    if task.family in ("facet", "prbox", "i3322") and task.omega is not None and task.channel.noiseless:
        return BoundResult(_relation_cover_bound(task), "closed_form",
                           {"formula": "max_D sum of omega over relations met by D"})
    return None


# ---------------------------------------------------------------------------
# no-signalling LP

def _snap_box(x: np.ndarray, dims) -> Correlation | None:
    vals = []
    for v in x:
        s = snap(float(v), max_den=72, tol=1e-6)
        if s is None:
            return None
        vals.append(s)
    arr = np.array(vals, dtype=object).reshape(dims)
    try:
        box = Correlation(arr)
    except ValueError:
        return None
    rep = validate(box)
    return box if rep.normalized and rep.no_signalling else None


def ns_bound_lp(obj, max_variables: int = LP_VARIABLE_BUDGET) -> BoundResult:
    """Maximum of the functional over the no-signalling polytope (HiGHS)."""
    from scipy.optimize import linprog

    from .correlations import _ns_equalities

    bf, _ = _as_functional(obj)
    dims = bf.dims
    rows, _, n = _ns_equalities(dims)
    if n > max_variables:
        raise BudgetExceeded(f"LP has {n} variables, budget is {max_variables}")
    X, Y = dims[:2]
    b = np.zeros(len(rows))
    b[:X * Y] = 1.0
    c = bf.as_float().ravel()
    res = linprog(-c, A_eq=rows, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"NS LP failed: {res.message}")
    x = res.x
    y = res.eqlin.marginals
    r = res.lower.marginals
    residuals = {
        "primal": float(max(np.abs(rows @ x - b).max(), max(0.0, -x.min()))),
        "dual": float(max(np.abs(-c - rows.T @ y - r).max(), max(0.0, -r.min()))),
        "gap": float(abs(-c @ x - b @ y)),
    }
    value: Any = float(c @ x)
    box = _snap_box(x, dims)
    if box is not None:
        from .wirecut import evaluate_bell
        exact = evaluate_bell(bf, box)
        target = snap(value)
        if target is not None and exact == target:
            value = exact
            residuals["snapped"] = True
        else:
            box = None
    if box is None:
        box = Correlation(x.reshape(dims))
        residuals["snapped"] = False
    return BoundResult(value, "lp", box, residuals)


# ---------------------------------------------------------------------------
# isotropic noise

@dataclass(frozen=True)
class IsotropicLine:
    intercept: Fraction          # payoff with white noise (p = 0)
    slope: Fraction              # payoff(1) - payoff(0)
    local_bound: Fraction
    threshold: Fraction          # advantage iff p > threshold

    def payoff(self, p):
        return self.intercept + self.slope * p


def isotropic_threshold(task: Task, proto: AssistedProtocol, local_bound=None) -> IsotropicLine:
    """Noise level above which the protocol beats shared randomness."""
    top = simulate_assisted(task, proto).payoff
    X, Y, A, B = proto.box.dims
    wn = simulate_assisted(task, proto.with_box(white_noise(X, Y, A, B))).payoff
    if top == wn:
        raise ValueError("protocol payoff does not depend on the noise level")
    if local_bound is None:
        cf = closed_form_local_bound(task)
        local_bound = (cf or local_bound_decoder_scan(task)).value
    return IsotropicLine(wn, top - wn, frac(local_bound), (frac(local_bound) - wn) / (top - wn))


# ---------------------------------------------------------------------------
# best protocol for a fixed assisting box

def optimal_assisted_payoff(task: Task, P: Correlation, budget: int = ASSISTED_BUDGET) -> BoundResult:
    """Best payoff over deterministic wirings (FX, FT, FY, FN) around a fixed box.

    Bob's maps are enumerated; for each, every input independently picks
    its query and its outcome-to-message map.
    """
    M, T, N = task.sizes
    X, Y, A, B = P.dims
    bob_count = Y ** T * N ** (T * B)
    count = bob_count * M * X * T ** A
    if count > budget:
        raise BudgetExceeded(f"{count} strategy tuples exceed the budget {budget}")
    W = task.wire_weights()
    Tm = task.channel.matrix
    Pt = P.table
    if not P.exact:
        W, Tm = np.asarray(W, dtype=float), np.asarray(Tm, dtype=float)
    best, arg = None, None
    for fy in itertools.product(range(Y), repeat=T):
        for fn_flat in itertools.product(range(N), repeat=T * B):
            fn = np.array(fn_flat).reshape(T, B)
            # U[m, x, a, tau'] = sum_b P[x, fy(tau'), a, b] W[m, tau', fn(tau', b)]
            U = sum(np.einsum("xa,m->mxa", Pt[:, fy[s], :, bb], W[:, s, fn[s, bb]])[..., None]
                    * (np.arange(T) == s) for s in range(T) for bb in range(B))
            V = np.einsum("mxas,ts->mxat", U, Tm)        # received tau' summed under T(tau'|tau)
            per_x = V.max(axis=3).sum(axis=2)            # [m, x]
            total = per_x.max(axis=1).sum()
            if best is None or total > best:
                best = total
                xs = per_x.argmax(axis=1)
                ft = [tuple(int(t) + 1 for t in V[m, xs[m]].argmax(axis=1)) for m in range(M)]
                arg = {"fx": tuple(int(x) + 1 for x in xs), "ft": tuple(ft),
                       "fy": tuple(v + 1 for v in fy),
                       "fn": tuple(tuple(int(v) + 1 for v in row) for row in fn)}
    return BoundResult(best, "assisted_enumeration", arg, {"strategy_tuples": count})
