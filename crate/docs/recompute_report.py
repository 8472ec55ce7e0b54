#!/usr/bin/env python3
"""Recompute the headline run-report numbers straight from a trace CSV.

Independent cross-check of the Rust report code: only the trace file is
consulted, with the same reductions spelled out in docs/trace_schema.md.

Usage: python3 docs/recompute_report.py runs/<name>/trace.csv [tail_fraction]
"""

import csv
import math
import re
import sys


def main(path, tail_fraction=0.25):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    t = [float(r["t"]) for r in rows]
    tail_from = t[-1] * (1.0 - tail_fraction)
    tail = [r for r, ti in zip(rows, t) if ti >= tail_from]
    has_leader = "x0_x" in rows[0]
    arms = sorted(
        int(m.group(1)) for k in rows[0] if (m := re.fullmatch(r"q(\d+)_1", k))
    )

    print(f"trace {path}: {len(rows)} rows, tail window [{tail_from:g}, {t[-1]:g}] s")
    if has_leader:
        sigma_cols = [f"sigma{a}" for a in arms]
        worst_sigma = [max(float(r[c]) for c in sigma_cols) for r in rows]
        settle = next(
            (ti for i, ti in enumerate(t) if all(s < 0.02 for s in worst_sigma[i:])),
            None,
        )
        print(f"estimator settle (tol 0.02): {settle if settle is not None else 'never'} s")
        for a in arms:
            pos = max(
                math.hypot(float(r[f"x{a}_x"]) - float(r["x0_x"]),
                           float(r[f"x{a}_y"]) - float(r["x0_y"])) for r in tail
            )
            vel = max(
                math.hypot(float(r[f"xd{a}_x"]) - float(r["v0_x"]),
                           float(r[f"xd{a}_y"]) - float(r["v0_y"])) for r in tail
            )
            extra = ""
            if f"manip{a}" in rows[0]:
                es_cols = [k for k in rows[0] if k.startswith(f"es{a}_")]
                es = max(math.sqrt(sum(float(r[c]) ** 2 for c in es_cols)) for r in tail)
                manip = sum(float(r[f"manip{a}"]) for r in tail) / len(tail)
                extra = f", null-space {es:.4f} rad/s, manip mean {manip:.4f}"
            print(f"arm {a}: tail position {pos:.4f} m, velocity {vel:.4f} m/s{extra}")
    else:
        coords = [(f"x{a}_x", f"x{a}_y") for a in arms]
        worst = max(
            math.hypot(float(r[xa]) - float(r[xb]), float(r[ya]) - float(r[yb]))
            for r in tail
            for (xa, ya) in coords
            for (xb, yb) in coords
        )
        print(f"leaderless: worst pairwise end-effector distance {worst:.4f} m over the tail")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    main(sys.argv[1], float(sys.argv[2]) if len(sys.argv) > 2 else 0.25)
