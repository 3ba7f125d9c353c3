"""Time each hot kernel under both backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The numba timings exclude compilation (one warm-up call first).
"""

import argparse
import statistics
import time

import numpy as np

from mechlab import _accel, discrete, kernels, lp
from mechlab.priors import separation_prior
from mechlab.reduced_form import highest_quantile_rule


def _lp_problem(seed=0, n=30, m=40):
    rng = np.random.default_rng(seed)
    rows = [(rng.integers(0, 6, n).tolist(), "<=", float(rng.integers(10, 40))) for _ in range(m)]
    return lp.LpProblem(rng.integers(1, 9, n).tolist(), "max", rows)


def cases():
    rng = np.random.default_rng(1)
    x = np.linspace(0, 1, 2049)
    c, s = rng.normal(size=4096), -rng.random(4096)
    Q = rng.random((10**6, 3))
    w = highest_quantile_rule(Q)
    prob = _lp_problem()
    prior = separation_prior(exact=False)
    return {
        "lower_envelope 2049x4096": lambda: kernels.lower_envelope(x, c, s),
        "tally 1e6x3": lambda: kernels.tally(Q, w, 64),
        "simplex 40x30": lambda: lp.solve(prob, "float"),
        "enumerate 3^9 tables": lambda: discrete.enumerate_pareto(prior, 2, "bic", threads=1),
    }


def timed(fn, repeat):
    fn()
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [False, True] if _accel.NUMBA_AVAILABLE else [False]
    print(f"{'kernel':28s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, fn in cases().items():
        t = {}
        for flag in backends:
            _accel.USE_NUMBA = flag
            t[flag] = timed(fn, args.repeat) * 1e3
        if True in t:
            print(f"{name:28s} {t[False]:11.2f} {t[True]:11.2f} {t[False] / t[True]:7.1f}x")
        else:
            print(f"{name:28s} {t[False]:11.2f} {'n/a':>11s}")


if __name__ == "__main__":
    main()
