"""Time each hot kernel under its numba build and its numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

The first numba call includes JIT compilation (or a cache load) and is
reported separately as ``warmup``.
"""
import argparse
import time

import numpy as np

from laborscape import kernels as k
from laborscape._accel import HAVE_NUMBA
from laborscape.occspace import Edge, OccupationNetwork


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale, rng):
    n_cities, n_occ = int(300 * scale), int(400 * scale)
    adv = (rng.random((n_cities, n_occ)) < 0.15).astype(np.uint8)
    yield "proximity", k.proximity_loops, k.proximity_numpy, (adv,)

    n = int(2000 * scale)
    m = 20 * n
    src = rng.integers(0, n, m).astype(np.int64)
    dst = rng.integers(0, n, m).astype(np.int64)
    yield "kruskal", k.kruskal_loops, k.kruskal_numpy, (src, dst, n)

    nodes = tuple(f"n{i:05d}" for i in range(int(1500 * scale)))
    a = rng.integers(0, len(nodes), 4 * len(nodes))
    b = rng.integers(0, len(nodes), 4 * len(nodes))
    edges = tuple(Edge(*sorted((nodes[i], nodes[j])), 1.0, "mst") for i, j in zip(a, b) if i != j)
    indptr, indices = OccupationNetwork(nodes, edges, 0.66).csr()
    yield "closeness", k.closeness_loops, k.closeness_numpy, (indptr, indices, len(nodes))

    x = rng.normal(size=100)
    y = 0.2 * x + rng.normal(size=100)
    yield "permutation", k.permutation_loops, k.permutation_numpy, (x - x.mean(), y, int(200_000 * scale), 0)

    pts = rng.normal(size=(int(20_000 * scale), 2))
    yield "lloyd", k.lloyd_loops, k.lloyd_numpy, (pts, pts[:2].copy(), 100)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="problem-size multiplier")
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable or disabled; the loop kernels run as plain Python")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12} {'warmup':>9} {'loops':>9} {'numpy':>9} {'speedup':>8}")
    for name, loops, vec, fargs in cases(args.scale, rng):
        t0 = time.perf_counter()
        loops(*fargs)
        warm = time.perf_counter() - t0
        t_loops = _best(loops, fargs, args.repeat)
        t_numpy = _best(vec, fargs, args.repeat)
        print(f"{name:<12} {warm:9.4f} {t_loops:9.4f} {t_numpy:9.4f} {t_numpy / t_loops:7.1f}x")


if __name__ == "__main__":
    main()
