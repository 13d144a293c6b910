"""NPA moment-matrix relaxations of a Bell functional, exported for external SDP solvers.

Operators are projectors E^x_a (Alice) and F^y_b (Bob) with the last
outcome of every setting eliminated through completeness.  A word is a pair
``(alice_ops, bob_ops)`` of tuples of ``(setting, outcome)``, 0-based; the
two halves commute.  Moments are taken real, so a word and its adjoint
(both halves reversed) share one variable.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .quantum import QuantumModel, naimark_dilation, quantum_payoff
from .wirecut import BellFunctional

ZERO_WORD = None
IDENTITY: tuple = ((), ())
LEVELS = (1, "1+AB", 2)


# ---------------------------------------------------------------------------
# projector algebra

def _reduce_half(ops: Sequence[tuple[int, int]]):
    """Apply idempotence and same-setting orthogonality; None if the product vanishes."""
    out: list[tuple[int, int]] = []
    for op in ops:
        if out and out[-1][0] == op[0]:
            if out[-1][1] != op[1]:
                return None
            continue
        out.append(tuple(op))
    return tuple(out)


def canonical(word: Iterable[tuple[str, int, int]]):
    """Canonical (alice, bob) form of an interleaved product, or None if it vanishes.

    ``word`` is a sequence of ``(party, setting, outcome)`` with party "A" or "B".
    """
    alice = [(s, o) for p, s, o in word if p == "A"]
    bob = [(s, o) for p, s, o in word if p == "B"]
    a, b = _reduce_half(alice), _reduce_half(bob)
    if a is None or b is None:
        return ZERO_WORD
    return (a, b)


def dagger(w):
    return (tuple(reversed(w[0])), tuple(reversed(w[1])))


def class_key(w):
    return None if w is None else min(w, dagger(w))


def _product(wi, wj):
    """Canonical form of wi^dagger wj."""
    a = _reduce_half(tuple(reversed(wi[0])) + wj[0])
    b = _reduce_half(tuple(reversed(wi[1])) + wj[1])
    if a is None or b is None:
        return ZERO_WORD
    return (a, b)


# ---------------------------------------------------------------------------
# spec

@dataclass(frozen=True, eq=False)
class MomentMatrixSpec:
    level: object
    dims: tuple[int, int, int, int]
    monomials: tuple                 # canonical words indexing rows/columns
    cell_class: np.ndarray           # int matrix: -1 zero, 0 identity, k >= 1 variable k
    classes: tuple                   # class keys, index 0 is the identity word
    objective: np.ndarray            # coefficient per class (index 0 unused, see offset)
    offset: float                    # objective = offset + sum_k objective[k] * y_k
    labels: tuple = field(default=())

    @property
    def size(self) -> int:
        return len(self.monomials)

    @property
    def n_variables(self) -> int:
        return len(self.classes) - 1


def _monomials(dims, level):
    X, Y, A, B = dims
    a_ops = [(x, a) for x in range(X) for a in range(A - 1)]
    b_ops = [(y, b) for y in range(Y) for b in range(B - 1)]
    words = [IDENTITY] + [((o,), ()) for o in a_ops] + [((), (o,)) for o in b_ops]
    if level in ("1+AB", 2):
        words += [((oa,), (ob,)) for oa in a_ops for ob in b_ops]
    if level == 2:
        for o1, o2 in itertools.product(a_ops, repeat=2):
            w = canonical([("A", *o1), ("A", *o2)])
            if w is not None:
                words.append(w)
        for o1, o2 in itertools.product(b_ops, repeat=2):
            w = canonical([("B", *o1), ("B", *o2)])
            if w is not None:
                words.append(w)
    seen, out = set(), []
    for w in words:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return tuple(out)


def _objective_terms(bf: BellFunctional):
    """Functional as offset + sum over moment words, using P(last) = 1 - sum(others)."""
    c = bf.as_float()
    X, Y, A, B = c.shape
    terms: dict = {}
    offset = 0.0

    def add(word, v):
        key = class_key(word)
        terms[key] = terms.get(key, 0.0) + v

    for x, y, a, b in itertools.product(range(X), range(Y), range(A), range(B)):
        v = c[x, y, a, b]
        if v == 0:
            continue
        # expand P(a,b|x,y) = <Ea Fb> with E_{A-1} = 1 - sum E, F_{B-1} = 1 - sum F
        a_terms = [((x, a),)] if a < A - 1 else [()] + [((x, a2),) for a2 in range(A - 1)]
        a_signs = [1.0] if a < A - 1 else [1.0] + [-1.0] * (A - 1)
        b_terms = [((y, b),)] if b < B - 1 else [()] + [((y, b2),) for b2 in range(B - 1)]
        b_signs = [1.0] if b < B - 1 else [1.0] + [-1.0] * (B - 1)
        for (aw, sa), (bw, sb) in itertools.product(zip(a_terms, a_signs), zip(b_terms, b_signs)):
            if aw == () and bw == ():
                offset += v * sa * sb
            else:
                add((aw, bw), v * sa * sb)
    return offset, terms


def build_moment_spec(bf: BellFunctional, level=1) -> MomentMatrixSpec:
    if level not in LEVELS:
        raise ValueError(f"unsupported NPA level {level!r}; choose from {LEVELS}")
    monos = _monomials(bf.dims, level)
    n = len(monos)
    index = {IDENTITY: 0}
    classes = [IDENTITY]
    cells = np.empty((n, n), dtype=int)
    for i, j in itertools.product(range(n), repeat=2):
        key = class_key(_product(monos[i], monos[j]))
        if key is None:
            cells[i, j] = -1
            continue
        if key not in index:
            index[key] = len(classes)
            classes.append(key)
        cells[i, j] = index[key]
    offset, terms = _objective_terms(bf)
    obj = np.zeros(len(classes))
    for key, v in terms.items():
        if key not in index:
            raise ValueError(f"objective word {key} missing from the level-{level} moment matrix")
        obj[index[key]] += v
    return MomentMatrixSpec(level, bf.dims, monos, cells, tuple(classes), obj, offset,
                            tuple(word_label(w) for w in monos))


def word_label(w) -> str:
    if w == IDENTITY:
        return "1"
    parts = [f"A{x + 1}|{a + 1}" for x, a in w[0]] + [f"B{y + 1}|{b + 1}" for y, b in w[1]]
    return "*".join(parts)


# ---------------------------------------------------------------------------
# SDPA export

def export_sdpa(spec: MomentMatrixSpec) -> str:
    """Sparse SDPA (dat-s) text.

    Primal form: minimize sum c_k y_k subject to sum y_k F_k - F_0 >= 0,
    with c = -objective, so the payoff bound is ``offset - optimum``.
    """
    m = spec.n_variables
    lines = [
        f'"NPA level {spec.level} moment matrix, dims (X,Y,A,B)={spec.dims}, size {spec.size}"',
        f"* payoff = {float(spec.offset)!r} - (primal objective)",
        f"* offset {float(spec.offset)!r}",
        str(m),
        "1",
        str(spec.size),
        " ".join(_fmt(-spec.objective[k]) for k in range(1, m + 1)) if m else "",
    ]
    n = spec.size
    for i in range(n):
        for j in range(i, n):
            k = spec.cell_class[i, j]
            if k == 0:
                lines.append(f"0 1 {i + 1} {j + 1} -1")     # identity cell: F_0 = -E_1
            elif k > 0:
                lines.append(f"{k} 1 {i + 1} {j + 1} 1")
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return repr(float(v)) if v != 0 else "0"


def parse_offset(dat_s: str) -> float:
    m = re.search(r"^\* offset (\S+)", dat_s, re.M)
    if m is None:
        raise ValueError("dat-s file carries no offset comment")
    return float(m.group(1))


def parse_solution(text: str, offset: float = 0.0) -> dict:
    """Objective values from an SDPA-style result file.

    Recognizes ``objValPrimal = v`` / ``objValDual = v`` and the plain
    ``primal objective: v`` / ``dual objective: v`` lines written by
    scripts/solve_dats.py.  Payoff bounds are ``offset - value``.
    """
    out = {}
    for key, pat in (("primal", r"objValPrimal\s*=\s*(\S+)|primal objective\s*:\s*(\S+)"),
                     ("dual", r"objValDual\s*=\s*(\S+)|dual objective\s*:\s*(\S+)")):
        m = re.search(pat, text)
        if m:
            out[key] = float(m.group(1) or m.group(2))
    if not out:
        raise ValueError("no objective line found in solver output")
    out["payoff_bound"] = offset - out.get("primal", out.get("dual"))
    return out


# ---------------------------------------------------------------------------
# soundness check against an explicit quantum model

@dataclass
class FeasibilityReport:
    min_eigenvalue: float
    max_class_violation: float
    identity_value: float
    objective: float
    payoff: float
    violations: list = field(default_factory=list)
    dilated: bool = False          # POVMs were replaced by a projective dilation first

    @property
    def ok(self) -> bool:
        return not self.violations


def _operator(word, model: QuantumModel) -> np.ndarray:
    dA, dB = model.dims
    opA, opB = np.eye(dA, dtype=complex), np.eye(dB, dtype=complex)
    for x, a in word[0]:
        opA = opA @ model.alice[x, a]
    for y, b in word[1]:
        opB = opB @ model.bob[y, b]
    return np.kron(opA, opB)


def moment_matrix(spec: MomentMatrixSpec, model: QuantumModel) -> np.ndarray:
    """G[i, j] = Tr(rho O_i^dagger O_j) for the spec's monomials."""
    ops = np.stack([_operator(w, model) for w in spec.monomials])     # [n, D, D]
    n = spec.size
    left = ops.reshape(n, -1).conj()
    right = (ops @ model.state).reshape(n, -1)
    # Tr(rho Oi^+ Oj) = sum_kl conj(Oi[l, k]) (Oj rho)[l, k]
    return left @ right.T


def verify_moment_feasibility(spec: MomentMatrixSpec, model: QuantumModel, bf: BellFunctional,
                              tol: float = 1e-8) -> FeasibilityReport:
    """Check that the model's moments satisfy every constraint of the spec.

    Non-projective measurements are first dilated to projective ones with
    the same statistics, since the moment matrix assumes projectors.
    """
    proj = naimark_dilation(model)
    dilated = proj is not model
    model = proj
    G = moment_matrix(spec, model)
    Gr = G.real
    violations = []
    min_eig = float(np.linalg.eigvalsh((Gr + Gr.T) / 2).min())
    if min_eig < -tol:
        violations.append(f"moment matrix has eigenvalue {min_eig:.3e}")
    cls = spec.cell_class.ravel()
    flatG, flatR = G.ravel(), Gr.ravel()
    zero = cls < 0
    zero_err = np.abs(flatG[zero])
    worst = float(zero_err.max()) if zero_err.size else 0.0
    for idx in np.flatnonzero(zero)[zero_err > tol][:5]:
        i, j = divmod(int(idx), spec.size)
        violations.append(f"cell ({i + 1},{j + 1}) should vanish, got {G[i, j]:.3e}")
    keys, first = np.unique(cls[~zero], return_index=True)
    live = np.flatnonzero(~zero)
    rep = np.zeros(int(cls.max()) + 1)
    rep[keys] = flatR[live[first]]
    class_err = np.abs(flatR[live] - rep[cls[live]])
    if class_err.size:
        worst = max(worst, float(class_err.max()))
    for idx in live[class_err > tol][:5]:
        i, j = divmod(int(idx), spec.size)
        violations.append(f"cell ({i + 1},{j + 1}) differs from its class by {class_err[live == idx][0]:.3e}")
    values = {int(k): float(rep[k]) for k in keys}
    ident = values.get(0, float("nan"))
    if not abs(ident - 1) <= tol:
        violations.append(f"identity cell is {ident}")
    objective = spec.offset + sum(spec.objective[k] * v for k, v in values.items() if k > 0)
    payoff = quantum_payoff(bf, model)
    if abs(objective - payoff) > tol:
        violations.append(f"objective {objective} differs from the model payoff {payoff}")
    return FeasibilityReport(min_eig, worst, ident, float(objective), payoff, violations, dilated)
