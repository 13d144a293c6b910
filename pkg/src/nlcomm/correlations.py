"""Bipartite boxes P(a,b|x,y): builders, validation, marginals, wirings.

Labels are 1-based everywhere in the public API; the underlying table is a
0-based array indexed ``[x, y, a, b]``.  Exact boxes hold ``Fraction``
objects (dtype=object), float boxes (from the quantum module) hold float64.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .rational import ONE, ZERO, frac, frac_array, frac_str, full, is_exact, zeros


class MalformedCorrelation(ValueError):
    """Structural problem with a box (shape, negative or missing entry)."""


class SignallingError(ValueError):
    """A no-signalling identity needed by the operation does not hold."""


class StochasticMapError(ValueError):
    """A pre/post-processing map has a row that is not a distribution."""


class Lemma2Violation(ValueError):
    """No Alice setting has a non-empty Phi-set for every outcome."""


@dataclass(frozen=True)
class Correlation:
    table: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = self.table
        if not isinstance(t, np.ndarray) or t.ndim != 4:
            raise MalformedCorrelation("box table must be a 4-index array [x, y, a, b]")
        if min(t.shape) < 1:
            raise MalformedCorrelation(f"non-positive dimension in {t.shape}")
        if is_exact(t):
            for idx in np.ndindex(t.shape):
                v = t[idx]
                if v is None:
                    raise MalformedCorrelation(f"missing entry at {tuple(i + 1 for i in idx)}")
                if not isinstance(v, Fraction):
                    t[idx] = frac(v)
        t.setflags(write=False)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.table.shape)  # (X, Y, A, B)

    @property
    def exact(self) -> bool:
        return is_exact(self.table)

    def p(self, a: int, b: int, x: int, y: int):
        return self.table[x - 1, y - 1, a - 1, b - 1]

    def as_float(self) -> np.ndarray:
        return np.asarray(self.table, dtype=float)

    def __eq__(self, other):
        if not isinstance(other, Correlation):
            return NotImplemented
        return self.dims == other.dims and bool(np.all(self.table == other.table))

    def __hash__(self):
        return hash((self.dims, tuple(self.table.ravel().tolist())))


@dataclass(frozen=True)
class ValidationReport:
    normalized: bool
    no_signalling: bool
    signalling_direction: str | None = None  # "A->B", "B->A" or "both"
    violation: str | None = None


@dataclass(frozen=True)
class PhiSets:
    x_star: int
    per_outcome: dict[int, tuple[int, ...]]
    per_outcome_images: dict[tuple[int, int], tuple[int, ...]]
    lb: tuple[int, ...]

    def union_images(self, a: int) -> tuple[int, ...]:
        out = set()
        for y in self.per_outcome[a]:
            out.update(self.per_outcome_images[(a, y)])
        return tuple(sorted(out))


def _close(u, v, atol):
    if atol is None:
        return u == v
    return abs(float(u) - float(v)) <= atol


def validate(corr: Correlation, atol: float | None = None) -> ValidationReport:
    """Normalization and both no-signalling directions.

    Exact boxes are compared exactly; float boxes use ``atol`` (default 1e-8).
    Negative entries raise ``MalformedCorrelation``.
    """
    t = corr.table
    if not corr.exact and atol is None:
        atol = 1e-8
    X, Y, A, B = corr.dims
    neg_tol = 0 if atol is None else atol
    for idx in np.ndindex(t.shape):
        if t[idx] < -neg_tol:
            raise MalformedCorrelation(
                f"negative entry P{tuple(i + 1 for i in (idx[2], idx[3], idx[0], idx[1]))}")
    normalized = all(_close(t[x, y].sum(), ONE, atol) for x in range(X) for y in range(Y))

    pa = t.sum(axis=3)  # [x, y, a]
    pb = t.sum(axis=2)  # [x, y, b]
    violation = None
    b_to_a = False
    for x, a in itertools.product(range(X), range(A)):
        for y in range(1, Y):
            if not _close(pa[x, y, a], pa[x, 0, a], atol):
                b_to_a = True
                violation = violation or (
                    f"P_A({a + 1}|x={x + 1},y={y + 1}) != P_A({a + 1}|x={x + 1},y=1)")
                break
    a_to_b = False
    for y, b in itertools.product(range(Y), range(B)):
        for x in range(1, X):
            if not _close(pb[x, y, b], pb[0, y, b], atol):
                a_to_b = True
                violation = violation or (
                    f"P_B({b + 1}|x={x + 1},y={y + 1}) != P_B({b + 1}|x=1,y={y + 1})")
                break
    direction = None
    if a_to_b and b_to_a:
        direction = "both"
    elif a_to_b:
        direction = "A->B"
    elif b_to_a:
        direction = "B->A"
    return ValidationReport(normalized, direction is None, direction, violation)


def from_function(dims: Sequence[int], fn, label: str = "") -> Correlation:
    """Box with entries ``fn(a, b, x, y)`` (1-based arguments)."""
    X, Y, A, B = dims
    t = zeros((X, Y, A, B))
    for x, y, a, b in itertools.product(range(X), range(Y), range(A), range(B)):
        t[x, y, a, b] = frac(fn(a + 1, b + 1, x + 1, y + 1))
    return Correlation(t, label)


def pr_box(alpha: int, beta: int, gamma: int) -> Correlation:
    """PR box with (a-1)+(b-1) = (x-1)(y-1) + alpha(x-1) + beta(y-1) + gamma mod 2."""
    for bit in (alpha, beta, gamma):
        if bit not in (0, 1):
            raise ValueError("alpha, beta, gamma must be bits")

    def entry(a, b, x, y):
        f = ((x - 1) * (y - 1)) ^ (alpha * (x - 1)) ^ (beta * (y - 1)) ^ gamma
        return Fraction(1, 2) if ((a - 1) ^ (b - 1)) == f else ZERO

    return from_function((2, 2, 2, 2), entry, label=f"PR({alpha},{beta},{gamma})")


def all_pr_boxes() -> list[Correlation]:
    return [pr_box(*bits) for bits in itertools.product((0, 1), repeat=3)]


_I3322_CORRELATED = {
    1: {(1, 1), (1, 2), (2, 1), (2, 2), (2, 3), (3, 2), (3, 3)},
    2: {(1, 1), (1, 2), (2, 1), (2, 2), (2, 3), (3, 2)},
}


def i3322_extremal(which: int) -> Correlation:
    """The two extremal boxes spanning the I3322-violating facet."""
    if which not in _I3322_CORRELATED:
        raise ValueError("which must be 1 or 2")
    corr_set = _I3322_CORRELATED[which]

    def entry(a, b, x, y):
        same = a == b
        if (x, y) in corr_set:
            return Fraction(1, 2) if same else ZERO
        return ZERO if same else Fraction(1, 2)

    return from_function((3, 3, 2, 2), entry, label=f"I3322*({which})")


def white_noise(X: int, Y: int, A: int, B: int) -> Correlation:
    return Correlation(full((X, Y, A, B), Fraction(1, A * B)), label="WN")


def mix(boxes: Sequence[Correlation], weights: Sequence) -> Correlation:
    """Convex combination of boxes sharing dims."""
    if len(boxes) != len(weights) or not boxes:
        raise ValueError("need one weight per box")
    dims = boxes[0].dims
    if any(bx.dims != dims for bx in boxes):
        raise ValueError(f"dimension mismatch in mixture: {[bx.dims for bx in boxes]}")
    exact = all(bx.exact for bx in boxes)
    if exact:
        ws = [frac(w) for w in weights]
        t = zeros(dims)
    else:
        ws = [float(w) for w in weights]
        t = np.zeros(dims)
    for w, bx in zip(ws, boxes):
        t = t + w * (bx.table if exact else bx.as_float())
    return Correlation(t)


def isotropic_mix(p, corr: Correlation) -> Correlation:
    """p * corr + (1 - p) * white noise."""
    p = frac(p) if corr.exact else float(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    out = mix([corr, white_noise(*corr.dims)], [p, 1 - p])
    return Correlation(out.table, label=f"{p}*{corr.label}+WN" if corr.label else "")


def deterministic_local(la: Sequence[int], lb: Sequence[int],
                        A: int | None = None, B: int | None = None) -> Correlation:
    """Box delta(a, la[x]) delta(b, lb[y]); ``la``/``lb`` hold 1-based outcomes."""
    A = A or max(la)
    B = B or max(lb)
    X, Y = len(la), len(lb)
    t = zeros((X, Y, A, B))
    for x, y in itertools.product(range(X), range(Y)):
        t[x, y, la[x] - 1, lb[y] - 1] = ONE
    return Correlation(t, label=f"L{tuple(la)}{tuple(lb)}")


def marginal_A(corr: Correlation, a: int, x: int):
    col = [corr.table[x - 1, y, a - 1].sum() for y in range(corr.dims[1])]
    for y, v in enumerate(col):
        if not _close(v, col[0], None if corr.exact else 1e-8):
            raise SignallingError(
                f"P_A({a}|x={x}) differs between y=1 and y={y + 1}: {col[0]} vs {v}")
    return col[0]


def marginal_B(corr: Correlation, b: int, y: int):
    col = [corr.table[x, y - 1, :, b - 1].sum() for x in range(corr.dims[0])]
    for x, v in enumerate(col):
        if not _close(v, col[0], None if corr.exact else 1e-8):
            raise SignallingError(
                f"P_B({b}|y={y}) differs between x=1 and x={x + 1}: {col[0]} vs {v}")
    return col[0]


# ---------------------------------------------------------------------------
# Phi-sets (message routing for facet protocols)

def _entry_or_zero(corr: Correlation, a: int, b: int, x: int, y: int):
    if b > corr.dims[3]:
        return ZERO
    return corr.p(a, b, x, y)


def _phi_at(extremals: Sequence[Correlation], lb: Sequence[int], x: int):
    X, Y, A, B = extremals[0].dims
    per_outcome = {}
    images = {}
    for a in range(1, A + 1):
        ys = tuple(y for y in range(1, Y + 1)
                   if all(_entry_or_zero(P, a, lb[y - 1], x, y) == 0 for P in extremals))
        per_outcome[a] = ys
        for y in ys:
            images[(a, y)] = tuple(b for b in range(1, B + 1)
                                   if any(P.p(a, b, x, y) > 0 for P in extremals))
    return per_outcome, images


def qualifying_settings(extremals: Sequence[Correlation], lb: Sequence[int]) -> list[int]:
    """All Alice settings x whose intersected Phi-sets are non-empty for every a."""
    _check_extremals(extremals, lb)
    X = extremals[0].dims[0]
    out = []
    for x in range(1, X + 1):
        per_outcome, _ = _phi_at(extremals, lb, x)
        if all(per_outcome.values()):
            out.append(x)
    return out


def _check_extremals(extremals, lb):
    if not extremals:
        raise ValueError("need at least one extremal box")
    dims = extremals[0].dims
    if any(P.dims != dims for P in extremals):
        raise ValueError("extremal boxes must share dims")
    if len(lb) != dims[1]:
        raise ValueError(f"lb must map [Y]=[{dims[1]}] to outcomes, got length {len(lb)}")


def phi_sets(extremals: Sequence[Correlation], lb: Sequence[int],
             x_star: int | None = None) -> PhiSets:
    """Phi-sets for the smallest qualifying setting (or the one given).

    Raises ``Lemma2Violation`` when no setting qualifies, which happens for
    boxes that carry weight on a local deterministic point.
    """
    _check_extremals(extremals, lb)
    lb = tuple(int(v) for v in lb)
    if x_star is None:
        xs = qualifying_settings(extremals, lb)
        if not xs:
            raise Lemma2Violation(
                f"Lemma 2 hypothesis violated: no setting x has non-empty Phi-sets for lb={lb}")
        x_star = xs[0]
    per_outcome, images = _phi_at(extremals, lb, x_star)
    if not all(per_outcome.values()):
        raise Lemma2Violation(f"setting x={x_star} has an empty Phi-set for lb={lb}")
    return PhiSets(x_star, per_outcome, images, lb)


# ---------------------------------------------------------------------------
# PR-block structure of dichotomic extremals

def _sub_box(corr: Correlation, xs, ys) -> Correlation:
    t = corr.table[np.ix_(list(xs), list(ys))]
    return Correlation(np.array(t, dtype=object))


def pr_blocks(pstar: Correlation) -> dict[tuple[int, int], tuple[int, int, tuple[int, int, int]]]:
    """For every Bob pair y' < y'', the first x' < x'' whose 2x2 sub-box is a PR box.

    Returns ``{(y', y''): (x', x'', (alpha, beta, gamma))}`` with 1-based labels.
    Raises ``ValueError`` when some pair has no PR block.
    """
    X, Y, A, B = pstar.dims
    if (A, B) != (2, 2):
        raise ValueError("PR-block structure needs dichotomic outcomes")
    boxes = {bits: pr_box(*bits) for bits in itertools.product((0, 1), repeat=3)}
    out = {}
    for y1, y2 in itertools.combinations(range(Y), 2):
        found = None
        for x1, x2 in itertools.combinations(range(X), 2):
            sub = _sub_box(pstar, (x1, x2), (y1, y2))
            for bits, box in boxes.items():
                if sub == box:
                    found = (x1 + 1, x2 + 1, bits)
                    break
            if found:
                break
        if found is None:
            raise ValueError(f"no PR block for Bob settings ({y1 + 1}, {y2 + 1})")
        out[(y1 + 1, y2 + 1)] = found
    return out


def parity_box(f: Sequence[Sequence[int]]) -> Correlation:
    """Dichotomic box with uniform marginals and (a-1)+(b-1) = f[x][y] mod 2."""
    f = np.asarray(f, dtype=int)
    X, Y = f.shape
    return from_function((X, Y, 2, 2),
                         lambda a, b, x, y: Fraction(1, 2) if ((a - 1) ^ (b - 1)) == f[x - 1, y - 1] else 0,
                         label=f"parity{f.tolist()}")


def pairwise_pr_candidate(d: int) -> Correlation:
    """Parity box on 1 + ceil(log2 d) Alice settings with a PR block for every Bob pair.

    Row 1 is all zeros and row 1+j holds bit j of (y-1), so any two Bob
    settings differ in some row and that row together with row 1 forms a PR
    box.  For d=2 this is ``pr_box(0, 0, 0)``.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    bits = int(np.ceil(np.log2(d)))
    f = [[0] * d] + [[((y >> j) & 1) for y in range(d)] for j in range(bits)]
    return parity_box(f)


def _ns_equalities(dims):
    X, Y, A, B = dims
    n = X * Y * A * B
    idx = lambda x, y, a, b: ((x * Y + y) * A + a) * B + b
    rows = []
    for x, y in itertools.product(range(X), range(Y)):
        r = np.zeros(n)
        for a, b in itertools.product(range(A), range(B)):
            r[idx(x, y, a, b)] = 1
        rows.append(r)
    for x, a, y in itertools.product(range(X), range(A), range(1, Y)):
        r = np.zeros(n)
        for b in range(B):
            r[idx(x, y, a, b)] += 1
            r[idx(x, 0, a, b)] -= 1
        rows.append(r)
    for y, b, x in itertools.product(range(Y), range(B), range(1, X)):
        r = np.zeros(n)
        for a in range(A):
            r[idx(x, y, a, b)] += 1
            r[idx(0, y, a, b)] -= 1
        rows.append(r)
    return np.array(rows), idx, n


def is_ns_vertex(corr: Correlation) -> bool:
    """True when the zero pattern pins the box down inside the NS polytope."""
    rows, idx, n = _ns_equalities(corr.dims)
    extra = []
    for x, y, a, b in itertools.product(*(range(k) for k in corr.dims)):
        if corr.table[x, y, a, b] == 0:
            r = np.zeros(n)
            r[idx(x, y, a, b)] = 1
            extra.append(r)
    full_rows = np.vstack([rows] + ([np.array(extra)] if extra else []))
    return int(np.linalg.matrix_rank(full_rows)) == n


def has_pairwise_pr_blocks(pstar: Correlation) -> bool:
    try:
        pr_blocks(pstar)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# local wirings

def check_stochastic(mat: np.ndarray, name: str) -> None:
    rows = mat.reshape(-1, mat.shape[-1])
    for i, row in enumerate(rows):
        if any(v < 0 for v in row) or sum(row) != 1:
            raise StochasticMapError(f"{name}: row {i} is not a probability distribution")


def wire_transform(P: Correlation, pre_a: np.ndarray, post_a: np.ndarray,
                   pre_b: np.ndarray, post_b: np.ndarray) -> Correlation:
    """Box P(tau, n | m, tau') obtained from local pre/post-processing of P.

    Shapes: pre_a[m, x] = p(x|m); post_a[m, a, tau] = p_e(tau|a,m);
    pre_b[tau', y] = p(y|tau'); post_b[tau', b, n] = p_d(n|tau',b).
    The result is indexed [m, tau', tau, n] (Alice setting, Bob setting,
    Alice outcome, Bob outcome).
    """
    X, Y, A, B = P.dims
    for mat, name, tail in ((pre_a, "p(x|m)", (X,)), (post_a, "p_e(tau|a,m)", None),
                            (pre_b, "p(y|tau')", (Y,)), (post_b, "p_d(n|tau',b)", None)):
        if tail and mat.shape[-1] != tail[0]:
            raise ValueError(f"{name} has {mat.shape[-1]} columns, box needs {tail[0]}")
        check_stochastic(mat, name)
    if post_a.shape[1] != A or post_b.shape[1] != B:
        raise ValueError("post-processing maps do not match box outcome counts")
    t = P.table
    q = np.einsum("mx,xyab->myab", pre_a, t)
    q = np.einsum("mat,myab->mytb", post_a, q)
    q = np.einsum("sy,mytb->mstb", pre_b, q)
    q = np.einsum("sbn,mstb->mstn", post_b, q)
    return Correlation(np.array(q, dtype=object if P.exact else float))


def relabel_settings(P: Correlation, x_perm: Sequence[int]) -> Correlation:
    """Box with Alice setting x read as x_perm[x-1] (1-based)."""
    t = P.table[[v - 1 for v in x_perm]]
    return Correlation(np.array(t, dtype=P.table.dtype))


# ---------------------------------------------------------------------------
# JSON

def to_json(corr: Correlation) -> dict:
    entries = []
    for x, y, a, b in itertools.product(*(range(n) for n in corr.dims)):
        v = corr.table[x, y, a, b]
        if v != 0:
            entries.append({"x": x + 1, "y": y + 1, "a": a + 1, "b": b + 1,
                            "p": frac_str(v) if corr.exact else float(v)})
    return {"dims": list(corr.dims), "entries": entries}


def from_json(data: dict) -> Correlation:
    try:
        dims = tuple(int(v) for v in data["dims"])
        if len(dims) != 4:
            raise KeyError("dims")
        t = zeros(dims)
        for e in data["entries"]:
            idx = (e["x"] - 1, e["y"] - 1, e["a"] - 1, e["b"] - 1)
            if any(i < 0 or i >= n for i, n in zip(idx, dims)):
                raise MalformedCorrelation(f"entry index out of range: {e}")
            t[idx] = frac(e["p"])
    except KeyError as exc:
        raise MalformedCorrelation(f"missing field {exc}") from exc
    return Correlation(t)
