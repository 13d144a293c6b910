"""Solve a single-block SDPA dat-s file with cvxpy (external check, not used by the library).

    python3 scripts/solve_dats.py problem.dat-s [--solver CLARABEL]

Prints ``primal objective: v`` and, when the file carries an offset
comment, ``payoff bound: offset - v``.
"""
from __future__ import annotations

import argparse
import re
import sys

import cvxpy as cp
import numpy as np
from scipy import sparse


def read_dats(text: str):
    """Objective vector c, constant matrix F0 and sparse coefficient map (m, n*n)."""
    body = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in '"*']
    m = int(body[0].split()[0])
    if int(body[1].split()[0]) != 1:
        raise SystemExit("only single-block problems are supported")
    n = abs(int(re.split(r"[\s,{}()]+", body[2].strip())[0]))
    c = np.array([float(v) for v in re.split(r"[\s,{}()]+", body[3].strip()) if v]) if m else np.zeros(0)
    F0 = np.zeros((n, n))
    rows, cols, vals = [], [], []
    for ln in body[4:]:
        k, _, i, j, v = ln.split()
        k, i, j, v = int(k), int(i) - 1, int(j) - 1, float(v)
        cells = {(i, j), (j, i)}
        if k == 0:
            for a, b in cells:
                F0[a, b] = v
        else:
            for a, b in cells:
                rows.append(a * n + b)
                cols.append(k - 1)
                vals.append(v)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n * n, m))
    return c, F0, A, n


def solve(text: str, solver: str | None = None) -> float:
    c, F0, A, n = read_dats(text)
    y = cp.Variable(len(c))
    M = cp.reshape(A @ y, (n, n), order="C") - F0
    prob = cp.Problem(cp.Minimize(c @ y), [(M + M.T) / 2 >> 0])
    prob.solve(solver=solver)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise SystemExit(f"solver status {prob.status}")
    return float(prob.value)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("path")
    ap.add_argument("--solver", default=None)
    args = ap.parse_args(argv)
    text = open(args.path).read()
    value = solve(text, args.solver)
    print(f"primal objective: {value!r}")
    m = re.search(r"^\* offset (\S+)", text, re.M)
    if m:
        print(f"payoff bound: {float(m.group(1)) - value:.8f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
