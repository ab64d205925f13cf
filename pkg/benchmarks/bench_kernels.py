"""Compare the compiled and pure-Python SGD kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--steps N] [--repeats R] [--json]

Each case trains a fresh tanh depth-family network on blobs data with both
backends from the same initialization, checks that the resulting weights
agree, and reports the best-of-R wall time per backend.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from subarch import kernels
from subarch.arch import ArchTemplate, activation, dense, instantiate
from subarch.data import gen_data
from subarch.trainer import HyperParams, sgd_shuffling_train

CASES = [(2, 1), (4, 2), (8, 3), (16, 4), (32, 4)]  # (width, depth)


def template(width_inputs: int) -> ArchTemplate:
    layers = (dense(width_inputs, "h", segment="A"), activation("tanh", "h", segment="A"),
              dense("h", "h", segment="B"), activation("tanh", "h", segment="B"),
              dense("h", 1, segment="C"), activation("sigmoid", 1, segment="C"))
    return ArchTemplate(layers, width_inputs, variables=("h", "n"), depth_var="n")


def time_backend(name, t, assignment, theta, steps, repeats):
    best, weights = float("inf"), None
    for _ in range(repeats):
        net = instantiate(t, assignment, seed=1)
        start = time.perf_counter()
        sgd_shuffling_train(net, theta, steps, backend=name)
        best = min(best, time.perf_counter() - start)
        weights = net.flat_weights()
    return best, weights


def run(steps: int, repeats: int) -> list[dict]:
    data = gen_data("blobs", 128, 4, 0.8, seed=0)
    theta = HyperParams(data, 0.05, shuffle_seed=3)
    t = template(4)
    rows = []
    for h, n in CASES:
        a = {"h": h, "n": n}
        row = {"h": h, "n": n, "steps": steps}
        ref = None
        for name in sorted(kernels.BACKENDS):
            seconds, w = time_backend(name, t, a, theta, steps, repeats)
            row[name] = seconds
            if ref is None:
                ref = w
            row["max_abs_diff"] = max(row.get("max_abs_diff", 0.0), float(np.max(np.abs(w - ref))))
        if "compiled" in row:
            row["speedup"] = row["python"] / row["compiled"]
        rows.append(row)
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--steps", type=int, default=5000)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--json", action="store_true", help="print rows as JSON")
    args = parser.parse_args()
    rows = run(args.steps, args.repeats)
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"backends available: {sorted(kernels.BACKENDS)} (default {kernels.BACKEND})")
    print(f"{'h':>4} {'n':>3} {'python s':>10} {'compiled s':>11} {'speedup':>8} {'max diff':>10}")
    for r in rows:
        compiled = f"{r['compiled']:11.4f}" if "compiled" in r else f"{'n/a':>11}"
        speedup = f"{r['speedup']:8.1f}" if "speedup" in r else f"{'n/a':>8}"
        print(f"{r['h']:>4} {r['n']:>3} {r['python']:10.4f} {compiled} {speedup} {r['max_abs_diff']:10.2e}")


if __name__ == "__main__":
    main()
