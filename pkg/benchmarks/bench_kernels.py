#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure-Python simulation kernels.

Both backends consume the same uniform stream, so outputs are checked for
bit-identity while timing. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--steps N] [--samples N]
"""
import argparse
import time

import numpy as np

from swarmcalc import ConstantPayoff, DriftSpec, SineFeedback
from swarmcalc import _kernels_py
from swarmcalc.urn import profile_tables, stream

try:
    from swarmcalc import _kernels as compiled
except ImportError:
    compiled = None


def time_backend(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=2_000_000)
    parser.add_argument("--samples", type=int, default=2_000_000)
    parser.add_argument("--n", type=int, default=64)
    parser.add_argument("--phi", type=float, default=0.75)
    args = parser.parse_args()

    spec = DriftSpec(SineFeedback(args.phi), ConstantPayoff(1.0), args.n)
    s_of, pos, pay = profile_tables(spec)
    n = spec.n

    benches = [
        ("trajectory", lambda mod, g: mod.trajectory(n, n // 2, args.steps, s_of, pos, pay, g),
         args.steps),
        ("revisions", lambda mod, g: mod.revisions(n, n // 2, args.steps, s_of, pos, pay, g),
         args.steps),
        ("state_samples", lambda mod, g: mod.state_samples(n, n // 4, args.samples, s_of, pos, pay, g),
         args.samples),
        ("final_state", lambda mod, g: mod.final_state(n, n // 2, args.steps, s_of, pos, pay, g),
         args.steps),
    ]

    print(f"urn kernels, n={args.n}, feedback intensity {args.phi}")
    print(f"{'kernel':<14}{'python':>14}{'cython':>14}{'speedup':>10}  identical")
    for name, runner, work in benches:
        t_py, out_py = time_backend(lambda g=None: runner(_kernels_py, stream(1, 0)))
        row = f"{name:<14}{work / t_py / 1e6:>11.2f} M/s"
        if compiled is None:
            print(row + f"{'n/a':>14}{'n/a':>10}")
            continue
        t_cy, out_cy = time_backend(lambda g=None: runner(compiled, stream(1, 0)))
        same = np.array_equal(np.asarray(out_py[0] if isinstance(out_py, tuple) else out_py),
                              np.asarray(out_cy[0] if isinstance(out_cy, tuple) else out_cy))
        print(row + f"{work / t_cy / 1e6:>11.2f} M/s{t_py / t_cy:>9.1f}x  {same}")
    if compiled is None:
        print("\ncompiled kernels not built; install with `pip install -e .` to compare")


if __name__ == "__main__":
    main()
