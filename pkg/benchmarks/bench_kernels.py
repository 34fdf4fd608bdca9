"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--T 24 96 384] [--repeat 20]

Both variants are imported directly from ``degdispatch.kernels`` so the
``DEGDISPATCH_NUMBA`` flag does not matter here. The first numba call
(compilation or cache load) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from degdispatch import kernels as k


def _time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _profile(T, rng):
    x = rng.uniform(0.0, 1.0, T + 1)
    x[-1] = x[0]
    return x


def cases(T, rng):
    x = _profile(T, rng)
    edges = k._rainflow_np(x)[1]
    lb = np.zeros(T + 1)
    ub = np.ones(T + 1)
    lb[0] = ub[0] = lb[-1] = ub[-1] = 0.5
    lo = np.full(T, -0.25)
    hi = np.full(T, 0.25)
    y = rng.normal(0.5, 0.4, T + 1)
    a, b, E, K, beta = 0.1, rng.uniform(100, 400, T), 500.0, 5e4, 2.03
    x0 = k._chain_project_py(y, lb, ub, lo, hi)[0]
    return {
        "rainflow": (lambda: k._rainflow_nb(x), lambda: k._rainflow_np(x)),
        "cycle_power_sum": (lambda: k._cycle_power_sum_nb(x, 2.03), lambda: k._cycle_power_sum_np(x, 2.03)),
        "chain_project": (lambda: k._chain_project_nb(y, lb, ub, lo, hi),
                          lambda: k._chain_project_np(y, lb, ub, lo, hi)),
        "dykstra": (lambda: k._dykstra_nb(y, lb, ub, lo, hi, 1e-10, 100000),
                    lambda: k._dykstra_np(y, lb, ub, lo, hi, 1e-10, 100000)),
        "apg": (lambda: k._apg_nb(x0, a, b, E, K, beta, edges, lb, ub, lo, hi, 1e-8, 2000),
                lambda: k._apg_np(x0, a, b, E, K, beta, edges, lb, ub, lo, hi, 1e-8, 2000)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, nargs="+", default=[24, 96, 384])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'T':>6}{'numba [ms]':>13}{'numpy [ms]':>13}{'speedup':>10}")
    for T in args.T:
        for name, (nb, np_) in cases(T, rng).items():
            t_nb = _time(nb, args.repeat)
            t_np = _time(np_, max(1, args.repeat // 4))
            print(f"{name:<16}{T:>6}{1e3 * t_nb:>13.4f}{1e3 * t_np:>13.4f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
