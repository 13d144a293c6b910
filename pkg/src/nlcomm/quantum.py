"""See-saw lower bounds on quantum-assisted payoffs.

The objective is sum c[x, y, a, b] Tr(rho E^x_a (x) F^y_b) for a Bell
functional c.  Each step optimizes one block (state, one Alice setting, one
Bob setting) with the others fixed, so the objective never decreases.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .correlations import Correlation
from .wirecut import BellFunctional

EIG_TOL = 1e-12
MODEL_TOL = 1e-9


class MonotonicityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """State rho on C^dA (x) C^dB and POVMs alice[x, a], bob[y, b]."""
    dims: tuple[int, int]
    state: np.ndarray        # (dA*dB, dA*dB)
    alice: np.ndarray        # (X, A, dA, dA)
    bob: np.ndarray          # (Y, B, dB, dB)

    def check(self, tol: float = MODEL_TOL) -> None:
        dA, dB = self.dims
        rho = self.state
        if rho.shape != (dA * dB, dA * dB):
            raise ValueError(f"state shape {rho.shape} does not match dims {self.dims}")
        _check_psd(rho, tol, "state")
        if abs(np.trace(rho) - 1) > tol:
            raise ValueError(f"state trace {np.trace(rho).real} != 1")
        for name, povms, d in (("alice", self.alice, dA), ("bob", self.bob, dB)):
            for s, elems in enumerate(povms):
                for o, E in enumerate(elems):
                    _check_psd(E, tol, f"{name}[{s + 1}][{o + 1}]")
                if np.abs(elems.sum(axis=0) - np.eye(d)).max() > tol:
                    raise ValueError(f"{name} setting {s + 1} does not sum to identity")

    def to_json(self) -> dict:
        def cplx(a):
            a = np.asarray(a)
            return {"shape": list(a.shape), "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}
        return {"dims": list(self.dims), "state": cplx(self.state),
                "alice": cplx(self.alice), "bob": cplx(self.bob)}

    @staticmethod
    def from_json(data: dict) -> "QuantumModel":
        def arr(d):
            return (np.array(d["re"]) + 1j * np.array(d["im"])).reshape(d["shape"])
        return QuantumModel(tuple(data["dims"]), arr(data["state"]), arr(data["alice"]), arr(data["bob"]))


def _check_psd(M, tol, name):
    if np.abs(M - M.conj().T).max() > tol:
        raise ValueError(f"{name} is not Hermitian")
    if np.linalg.eigvalsh(_herm(M)).min() < -tol:
        raise ValueError(f"{name} is not positive semidefinite")


def _herm(M):
    return (M + M.conj().T) / 2


# ---------------------------------------------------------------------------
# objective blocks

def _rho4(model: QuantumModel) -> np.ndarray:
    dA, dB = model.dims
    return model.state.reshape(dA, dB, dA, dB)


def bell_operator(bf: BellFunctional, model: QuantumModel, fix: str) -> np.ndarray:
    """Operators whose trace against the free block gives the objective.

    fix="state": G = sum c E (x) F, so the objective is Tr(rho G).
    fix="bob":   R[x, a] on Alice's space, objective sum Tr(E^x_a R[x, a]).
    fix="alice": S[y, b] on Bob's space, objective sum Tr(F^y_b S[y, b]).
    """
    c = bf.as_float()
    X, Y, A, B = c.shape
    dA, dB = model.dims
    if model.alice.shape[:2] != (X, A) or model.bob.shape[:2] != (Y, B):
        raise ValueError("model settings/outcomes do not match the functional")
    if fix == "state":
        K = np.einsum("xyab,ybjl->xajl", c, model.bob)            # Bob side per (x, a)
        G = np.einsum("xaik,xajl->ijkl", model.alice, K).reshape(dA * dB, dA * dB)
        return _herm(G)
    rho = _rho4(model)
    if fix == "bob":
        K = np.einsum("xyab,ybjl->xajl", c, model.bob)
        return _herm_stack(np.einsum("xajm,imkj->xaik", K, rho))
    if fix == "alice":
        L = np.einsum("xyab,xaik->ybik", c, model.alice)
        return _herm_stack(np.einsum("ybim,mjil->ybjl", L, rho))
    raise ValueError(f"fix must be state, alice or bob, not {fix!r}")


def _herm_stack(R):
    return (R + np.conj(np.swapaxes(R, -1, -2))) / 2


def _objective_from_blocks(E, R) -> float:
    """sum over (s, o) of Tr(E[s, o] R[s, o])."""
    return float(np.einsum("soij,soji->", E, R).real)


def quantum_payoff(bf: BellFunctional, model: QuantumModel) -> float:
    return float(np.real(np.trace(model.state @ bell_operator(bf, model, "state"))))


def model_to_box(model: QuantumModel) -> Correlation:
    P = np.einsum("ijkl,xaki,yblj->xyab", _rho4(model), model.alice, model.bob).real
    return Correlation(P.copy(), label="quantum")


# ---------------------------------------------------------------------------
# block updates

def _top_state(G: np.ndarray) -> np.ndarray:
    """Pure state maximizing Tr(rho G); ties go to the lexicographically largest real parts."""
    w, V = np.linalg.eigh(_herm(G))
    top = [i for i in range(len(w)) if w[i] >= w[-1] - EIG_TOL]
    best = None
    for i in top:
        v = V[:, i]
        j = int(np.argmax(np.abs(v) > 1e-9))
        v = v * np.exp(-1j * np.angle(v[j]))
        key = tuple(np.round(v.real, 12))
        if best is None or key > best[0]:
            best = (key, v)
    return best[1]


def _nonneg_projector(D: np.ndarray) -> np.ndarray:
    """Projector onto eigenvalues >= -EIG_TOL (the zero band goes to the first element).

    Works on a single matrix or a stack.
    """
    w, V = np.linalg.eigh(_herm_stack(D))
    keep = V * (w >= -EIG_TOL)[..., None, :]
    return keep @ np.conj(np.swapaxes(keep, -1, -2))


def _pair_update(S: np.ndarray, Ri: np.ndarray, Rj: np.ndarray):
    """Best split S = Ei + Ej for Tr(Ei Ri) + Tr(Ej Rj), batched over leading axes.

    Ei = S^1/2 Z S^1/2 with Z the non-negative projector of
    S^1/2 (Ri - Rj) S^1/2 restricted to the support of S.
    """
    s, U = np.linalg.eigh(_herm_stack(S))
    root = np.sqrt(np.where(s > EIG_TOL, s, 0.0))
    V = U * root[..., None, :]
    Vh = np.conj(np.swapaxes(V, -1, -2))
    Z = _nonneg_projector(Vh @ (Ri - Rj) @ V)
    Ei = _herm_stack(V @ Z @ Vh)
    return Ei, _herm_stack(S - Ei)


def _tr(E, R):
    """Tr(E R) over the trailing matrix axes."""
    return np.einsum("...ij,...ji->...", E, R).real


def _update_measurements(E: np.ndarray, R: np.ndarray, max_rounds: int = 50) -> np.ndarray:
    """Improve every setting's POVM E[s, o] against objective blocks R[s, o].

    Two outcomes: exact optimum.  More outcomes: cyclic pairwise splits,
    each accepted only where it does not lower that setting's objective.
    """
    K, d = E.shape[1], E.shape[-1]
    if K == 1:
        return E
    if K == 2:
        P = _nonneg_projector(R[:, 0] - R[:, 1])
        return np.stack([P, np.eye(d) - P], axis=1)
    E = E.copy()
    value = _tr(E, R).sum(axis=1)
    for _ in range(max_rounds):
        start = value
        for i in range(K):
            for j in range(i + 1, K):
                Ei, Ej = _pair_update(E[:, i] + E[:, j], R[:, i], R[:, j])
                old = _tr(E[:, i], R[:, i]) + _tr(E[:, j], R[:, j])
                new = _tr(Ei, R[:, i]) + _tr(Ej, R[:, j])
                ok = new >= old
                E[ok, i], E[ok, j] = Ei[ok], Ej[ok]
        value = _tr(E, R).sum(axis=1)
        if (value - start).max() <= EIG_TOL:
            break
    return E


# ---------------------------------------------------------------------------
# projective dilation

def is_projective(povms: np.ndarray, tol: float = MODEL_TOL) -> bool:
    """True when every element of every setting is idempotent."""
    return bool(np.abs(povms @ povms - povms).max() <= tol)


def _root(E: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(_herm(E))
    return (U * np.sqrt(np.clip(w, 0, None))) @ U.conj().T


def _dilate_party(povms: np.ndarray) -> np.ndarray:
    """Projectors on C^d (x) C^K reproducing each POVM on inputs of the form psi (x) |0>.

    Setting s uses a unitary U_s whose (i, 0) columns are the isometry
    psi -> sum_o sqrt(E_o) psi (x) |o>; its projectors are U_s^+ (1 (x) |o><o|) U_s.
    """
    from scipy.linalg import null_space

    S, K, d, _ = povms.shape
    D = d * K
    out = np.zeros((S, K, D, D), dtype=complex)
    for s in range(S):
        V = np.zeros((D, d), dtype=complex)
        for o in range(K):
            V[o::K] = _root(povms[s, o])        # rows (i, o) at index i*K + o
        U = np.zeros((D, D), dtype=complex)
        U[:, ::K] = V
        rest = [c for c in range(D) if c % K]
        U[:, rest] = null_space(V.conj().T)
        for o in range(K):
            Pi = np.zeros(D)
            Pi[o::K] = 1
            out[s, o] = _herm(U.conj().T @ (Pi[:, None] * U))
    return out


def naimark_dilation(model: QuantumModel, tol: float = MODEL_TOL) -> QuantumModel:
    """Projective model with the same box; parties already projective are left as they are."""
    dA, dB = model.dims
    alice, bob, state = model.alice, model.bob, model.state
    kA = kB = 1
    if not is_projective(alice, tol):
        kA = alice.shape[1]
        alice = _dilate_party(alice)
    if not is_projective(bob, tol):
        kB = bob.shape[1]
        bob = _dilate_party(bob)
    if kA == kB == 1:
        return model
    # rho (x) |0><0| on each ancilla, reordered to (A, ancA, B, ancB)
    a0, b0 = np.zeros(kA), np.zeros(kB)
    a0[0] = b0[0] = 1
    rho4 = _rho4(model)
    big = np.einsum("ijkl,p,q,r,s->ipjrkqls", rho4, a0, a0, b0, b0)
    D = dA * kA * dB * kB
    return QuantumModel((dA * kA, dB * kB), big.reshape(D, D), alice, bob)


# ---------------------------------------------------------------------------
# random initialization

def haar_state(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    Z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_projective(rng: np.random.Generator, d: int, outcomes: int) -> np.ndarray:
    """Projective measurement: a random basis split into consecutive groups, one per outcome.

    With more outcomes than dimensions some elements are zero; which ones
    is random.
    """
    U = random_unitary(rng, d)
    owner = np.sort(rng.integers(0, outcomes, size=d)) if outcomes > d else \
        np.sort(np.concatenate([np.arange(outcomes), rng.integers(0, outcomes, size=d - outcomes)]))
    owner = rng.permutation(outcomes)[owner]
    E = np.zeros((outcomes, d, d), dtype=complex)
    for col, o in enumerate(owner):
        v = U[:, col:col + 1]
        E[o] += v @ v.conj().T
    return E


def random_povm(rng: np.random.Generator, d: int, outcomes: int) -> np.ndarray:
    """Rank-one POVM from a random isometry C^d -> C^outcomes (when outcomes > d)."""
    if outcomes <= d:
        return random_projective(rng, d, outcomes)
    U = random_unitary(rng, outcomes)[:, :d]          # isometry, rows are sub-normalized vectors
    return np.stack([np.outer(U[o].conj(), U[o]) for o in range(outcomes)])


def random_model(rng: np.random.Generator, dims, X, Y, A, B, povm_init: bool = False) -> QuantumModel:
    dA, dB = dims
    psi = haar_state(rng, dA * dB)
    init = random_povm if povm_init else random_projective
    alice = np.stack([init(rng, dA, A) for _ in range(X)])
    bob = np.stack([init(rng, dB, B) for _ in range(Y)])
    return QuantumModel(tuple(dims), np.outer(psi, psi.conj()), alice, bob)


# ---------------------------------------------------------------------------
# see-saw

@dataclass
class SeesawResult:
    best_value: float
    best_model: QuantumModel
    dims: tuple[int, int]
    seed: int
    restarts: int
    best_restart: int
    iterations: int
    trace: list = field(default_factory=list)      # objective after each sweep, best restart
    values: list = field(default_factory=list)     # final value per restart

    def to_json(self, include_model: bool = True) -> dict:
        out = {"value": self.best_value, "dims": list(self.dims), "seed": self.seed,
               "restarts": self.restarts, "best_restart": self.best_restart,
               "iterations": self.iterations, "trace": self.trace}
        if include_model:
            out["model"] = self.best_model.to_json()
        return out


def _single_run(c: np.ndarray, dims, rng, max_sweeps: int, tol: float, povm_init: bool):
    X, Y, A, B = c.shape
    bf = BellFunctional(np.array(c, dtype=float), "")
    model = random_model(rng, dims, X, Y, A, B, povm_init)
    dA, dB = dims
    trace = []
    value = -np.inf

    def guard(new, old, where):
        if new < old - 1e-9:
            raise MonotonicityError(f"objective dropped from {old} to {new} at {where}")
        return new

    alice, bob, state = model.alice.copy(), model.bob.copy(), model.state
    for sweep in range(max_sweeps):
        start = value
        G = bell_operator(bf, QuantumModel(dims, state, alice, bob), "state")
        psi = _top_state(G)
        state = np.outer(psi, psi.conj())
        cur = quantum_payoff(bf, QuantumModel(dims, state, alice, bob))
        value = guard(cur, value, "state step")
        R = bell_operator(bf, QuantumModel(dims, state, alice, bob), "bob")
        alice = _update_measurements(alice, R)
        S = bell_operator(bf, QuantumModel(dims, state, alice, bob), "alice")
        cur = _objective_from_blocks(alice, R)
        value = guard(cur, value, "alice step")
        bob = _update_measurements(bob, S)
        cur = _objective_from_blocks(bob, S)
        value = guard(cur, value, "bob step")
        trace.append(value)
        if value - start < tol:
            break
    return value, QuantumModel(tuple(dims), state, alice, bob), trace


def _restart_worker(args):
    c, dims, seed, idx, max_sweeps, tol, povm_init = args
    rng = np.random.default_rng([seed, idx])
    value, model, trace = _single_run(c, dims, rng, max_sweeps, tol, povm_init)
    return idx, value, model, trace


def seesaw(bf: BellFunctional, dA: int, dB: int, restarts: int = 100, seed: int = 0,
           max_sweeps: int = 500, tol: float = 1e-10, jobs: int = 1,
           povm_init: bool | None = None) -> SeesawResult:
    """Best see-saw value over independent random restarts.

    Restart r draws from ``default_rng([seed, r])`` so results do not depend
    on scheduling.  ``povm_init`` starts settings with more outcomes than
    dimensions from rank-one POVMs; by default every odd restart does so.
    """
    if restarts < 1 or dA < 2 or dB < 2:
        raise ValueError("need restarts >= 1 and local dimensions >= 2")
    c = bf.as_float()
    def mode(r):
        return (r % 2 == 1) if povm_init is None else povm_init
    tasks = [(c, (dA, dB), seed, r, max_sweeps, tol, mode(r)) for r in range(restarts)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_restart_worker, tasks, chunksize=max(1, restarts // (4 * jobs))))
    else:
        runs = [_restart_worker(t) for t in tasks]
    runs.sort(key=lambda r: r[0])
    best = max(runs, key=lambda r: (r[1], -r[0]))
    return SeesawResult(best[1], best[2], (dA, dB), seed, restarts, best[0], len(best[3]),
                        best[3], [r[1] for r in runs])
