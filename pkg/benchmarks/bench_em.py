"""Time the compiled and numpy EM kernels on one edge fit.

Usage: python3 benchmarks/bench_em.py [--n 2000] [--dims 5 15 30] [--repeats 3]
"""
import argparse
import time

import numpy as np

from comptree._backend import BACKEND, get_run_em
from comptree.edge_model import EmConfig, initial_params


def zero_inflated(rng, n, d, rate):
    x = rng.dirichlet(np.ones(d), size=n)
    keep = rng.random((n, d)) >= rate
    keep[np.arange(n), rng.integers(0, d, n)] = True
    x = np.where(keep, x, 0.0)
    return x / x.sum(axis=1, keepdims=True)


def best_time(fn, repeats):
    out, best = None, float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--dims", type=int, nargs="+", default=[5, 15, 30])
    ap.add_argument("--zero-rate", type=float, default=0.4)
    ap.add_argument("--max-iters", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"] + (["cython"] if BACKEND == "cython" else [])
    if BACKEND != "cython":
        print("compiled kernel not available; timing the numpy fallback only")
    print(f"{'d':>4} {'mode':>11} {'backend':>8} {'iters':>6} {'seconds':>9} {'risk':>14} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for d in args.dims:
        xc, xp = zero_inflated(rng, args.n, d, args.zero_rate), zero_inflated(rng, args.n, d, args.zero_rate)
        cfg = EmConfig()
        start = initial_params(xc, d, cfg, restart=1)
        for accelerate in (False, True):
            base = None
            for name in backends:
                run_em = get_run_em(name)

                def fit():
                    return run_em(xc, xp, start.omega0, start.eta, start.M, args.max_iters, cfg.rel_tol,
                                  cfg.omega_min, cfg.eta_min, accelerate)

                secs, out = best_time(fit, args.repeats)
                base = base or secs
                mode = "accelerated" if accelerate else "plain"
                print(f"{d:>4} {mode:>11} {name:>8} {out[5]:>6} {secs:>9.4f} {out[3][-1]:>14.10f} {base / secs:>7.1f}x")


if __name__ == "__main__":
    main()
