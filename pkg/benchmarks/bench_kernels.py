"""Compiled versus numpy particle/grid kernels, per kernel and end to end.

    python benchmarks/bench_kernels.py [--particles 2000] [--orders 4,8,12] [--repeat 5]
"""

import argparse
import math
import timeit

import numpy as np

from kpme import kernels
from kpme.alphaskp import EwaldConfig, sinc_rule_for_eps, skp_from_quadrature
from kpme.geometry import Box3, uniform_point_cloud
from kpme.parallel import run_kpme


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_rows(n, orders, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for L in orders:
        nodes = np.linspace(-1, 1, L)
        t = rng.uniform(-1, 1, n)
        w = [rng.standard_normal((n, L)) for _ in range(3)]
        q = rng.standard_normal(n)
        g = rng.standard_normal((L, L, L))
        cases = {
            "lagrange_weights": lambda impl: impl.lagrange_weights(nodes, t),
            "spread": lambda impl: impl.spread(*w, q),
            "gather": lambda impl: impl.gather(*w, g),
        }
        for name, call in cases.items():
            py = best_of(lambda: call(kernels.py_impl), repeat)
            c = best_of(lambda: call(kernels.c_impl), repeat) if kernels.c_impl else float("nan")
            rows.append((name, L, py, c))
    return rows


def end_to_end(n, L, repeat):
    M = 4
    cfg = EwaldConfig(3.0, M)
    box = Box3((0.0, 0.0, 0.0), 0.25 / (math.pi * M))
    X, q = uniform_point_cloud(box, n, seed=1)
    dec = skp_from_quadrature(sinc_rule_for_eps(1e-8, M), cfg)
    out = {}
    for label, impl in (("python", kernels.py_impl), ("cython", kernels.c_impl)):
        if impl is None:
            continue
        saved = kernels.lagrange_weights, kernels.spread, kernels.gather
        kernels.lagrange_weights, kernels.spread, kernels.gather = impl.lagrange_weights, impl.spread, impl.gather
        try:
            out[label] = best_of(lambda: run_kpme(X, q, cfg, box, L, dec), repeat)
        finally:
            kernels.lagrange_weights, kernels.spread, kernels.gather = saved
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=2000)
    ap.add_argument("--orders", default="4,8,12")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    orders = [int(v) for v in args.orders.split(",")]

    print(f"default backend: {kernels.BACKEND}")
    print(f"{'kernel':<18}{'L':>4}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, L, py, c in kernel_rows(args.particles, orders, args.repeat):
        print(f"{name:<18}{L:>4}{py * 1e3:>12.3f}{c * 1e3:>12.3f}{py / c:>10.1f}")
    e2e = end_to_end(args.particles, max(orders), args.repeat)
    print(f"end to end, N={args.particles}, L={max(orders)}: "
          + ", ".join(f"{k} {v * 1e3:.1f} ms" for k, v in e2e.items()))


if __name__ == "__main__":
    main()
