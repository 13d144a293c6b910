"""Reproduce the two-qubit see-saw table for CS[d,k] and the qutrit CS[2,3] row.

    python3 scripts/table2.py --restarts 200 --jobs 4 --out results/table2.csv
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import time

from nlcomm.bounds import local_bound_decoder_scan
from nlcomm.cli import write_atomic
from nlcomm.quantum import seesaw
from nlcomm.tasks import build_cs, build_i3322_task
from nlcomm.wirecut import bell_from_task

# (label, task builder, dims, reference value)
ROWS = [
    ("CS[2,2]", lambda: build_cs(2, 2), (2, 2), 0.85355),
    ("CS[3,2]", lambda: build_cs(3, 2), (2, 2), 0.94975),
    ("CS[4,2]", lambda: build_cs(4, 2), (2, 2), 0.97487),
    ("CS[5,2]", lambda: build_cs(5, 2), (2, 2), 0.99235),
    ("CS[6,2]", lambda: build_cs(6, 2), (2, 2), 0.99371),
    ("CS[2,3]", lambda: build_cs(2, 3), (2, 2), 0.93491),
    ("CS[2,4]", lambda: build_cs(2, 4), (2, 2), 0.96338),
    ("CS[2,5]", lambda: build_cs(2, 5), (2, 2), 0.97656),
    ("CS[2,6]", lambda: build_cs(2, 6), (2, 2), 0.98373),
    ("CS[3,3]", lambda: build_cs(3, 3), (2, 2), 0.98511),
    ("CS[2,3]", lambda: build_cs(2, 3), (3, 3), 0.93883),
    ("I3322 task", build_i3322_task, (2, 2), 0.85355),
]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--restarts", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--only", help="substring filter on the row label")
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task", "dA", "dB", "seesaw", "reference", "difference", "local_bound",
                "restarts", "seed", "seconds"])
    for label, build, dims, ref in ROWS:
        if args.only and args.only not in label:
            continue
        task = build()
        bf = bell_from_task(task)
        t0 = time.perf_counter()
        res = seesaw(bf, *dims, restarts=args.restarts, seed=args.seed, jobs=args.jobs)
        secs = time.perf_counter() - t0
        local = float(local_bound_decoder_scan(task).value)
        w.writerow([label, dims[0], dims[1], f"{res.best_value:.12g}", ref,
                    f"{res.best_value - ref:.3g}", f"{local:.12g}", args.restarts, args.seed,
                    f"{secs:.1f}"])
        print(f"{label:11s} dims={dims} seesaw={res.best_value:.6f} ref={ref} ({secs:.1f}s)",
              file=sys.stderr)
    write_atomic(args.out, buf.getvalue())
    return 0


if __name__ == "__main__":
    sys.exit(main())
