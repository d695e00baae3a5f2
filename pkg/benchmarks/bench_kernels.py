"""Time the compiled and numpy propagation kernels on the same batches.

    python benchmarks/bench_kernels.py [--rows 10000] [--steps 400] [--repeat 3]
"""
import argparse
import os
import time

import numpy as np

from simverify import integrate
from simverify.dynamics import linear_nd, sgn_cubic


def _time(model, X, steps, kind, repeat, threads):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out, _ = integrate.propagate_batch(model, X, 0.01, steps, kind, threads=threads)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--rows", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    if not integrate.native_available():
        print("native kernel not built; run `python setup.py build_ext --inplace` first")
        return 1
    rng = np.random.default_rng(0)
    cases = [
        ("sgn-cubic", sgn_cubic(), rng.uniform(-1.5, 1.5, (args.rows, 1))),
        ("linear-nd 3x3", linear_nd([[-1.0, 2.0, 0.1], [-2.0, -1.0, 0.3], [0.0, 0.5, -0.7]]),
         rng.uniform(-1, 1, (args.rows, 3))),
    ]
    print(f"{'model':<16}{'kind':<7}{'native s':>10}{'python s':>10}{'speedup':>9}  identical")
    for name, model, X in cases:
        for kind in integrate.IntegratorKind:
            os.environ["SIMVERIFY_BACKEND"] = "native"
            tn, a = _time(model, X, args.steps, kind, args.repeat, args.threads)
            os.environ["SIMVERIFY_BACKEND"] = "python"
            tp, b = _time(model, X, args.steps, kind, args.repeat, args.threads)
            print(f"{name:<16}{kind.name:<7}{tn:>10.4f}{tp:>10.4f}{tp / tn:>8.1f}x  "
                  f"{np.array_equal(a, b)}")
    os.environ.pop("SIMVERIFY_BACKEND", None)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
