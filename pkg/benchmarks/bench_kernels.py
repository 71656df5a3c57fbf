"""Compare the compiled and numpy urn kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--reps 20000] [--m 50] [--repeat 3]

Both kernels consume the same uniforms, so the script also asserts that the
labels agree before reporting timings.
"""

import argparse
import time

import numpy as np

from spikeslab.kernels import run_urn_numba, run_urn_numpy
from spikeslab.nig import NigParams
from spikeslab.stable import StableParams
from spikeslab.urn import make_urn


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20000)
    ap.add_argument("--m", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    U = rng.random((args.reps, args.m, 2))
    cases = [
        ("stable s=0.25 z=0.5 inner", StableParams(0.25, 0.5), False),
        ("stable s=0.75 z=0.25 outer", StableParams(0.75, 0.25), True),
        ("nig c=1 tau=1 z=0.5 inner", NigParams(1.0, 1.0, 0.5), False),
    ]
    print(f"{'case':30s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, params, outer in cases:
        urn = make_urn(params).prepare(args.m + 1)
        call = lambda f: f(U, np.zeros(0, dtype=np.int64), 0, 0, outer, urn)
        call(run_urn_numba)  # compile outside the timing
        t_nb, lab_nb = best_of(lambda: call(run_urn_numba), args.repeat)
        t_np, lab_np = best_of(lambda: call(run_urn_numpy), args.repeat)
        if not np.array_equal(lab_nb, lab_np):
            raise SystemExit(f"{name}: kernels disagree")
        print(f"{name:30s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
