"""Timing of the walk-feature kernel: compiled extension vs pure Python.

    python3 benchmarks/bench_kernels.py [--n 2000] [--k 12] [--hops 2] [--repeat 3]

Both backends are run on the same K-NN graph and their outputs are compared
before timings are reported.
"""
import argparse
import time

import numpy as np

from manifold_rewiring import kernels
from manifold_rewiring.graph import knn_graph
from manifold_rewiring.manifolds import sample_sphere_uniform


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--hops", type=int, nargs="+", default=[1, 2])
    p.add_argument("--pairs", type=int, default=2000, help="edges scored per call")
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    g = knn_graph(sample_sphere_uniform(args.n, 0).points, args.k, metric="geodesic")
    indptr, indices = g.csr()
    alive = np.ones(len(indices), dtype=np.uint8)
    pairs = g.edge_array()[: args.pairs]
    print(f"graph: {g.n_vertices} vertices, {g.n_edges} edges; scoring {len(pairs)} edges")
    if kernels.BACKEND != "cython":
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    print(f"{'h':>2} {'backend':<12} {'seconds':>9} {'edges/s':>10} {'speedup':>8}")
    for h in args.hops:
        t_py, ref = best_of(lambda: kernels.walk_features_batch(indptr, indices, alive, pairs, h,
                                                                backend="python"), args.repeat)
        print(f"{h:>2} {'python':<12} {t_py:9.3f} {len(pairs) / t_py:10.0f} {1.0:8.1f}")
        if kernels.BACKEND != "cython":
            continue
        for threads in sorted({1, args.threads}):
            t, out = best_of(lambda: kernels.walk_features_batch(indptr, indices, alive, pairs, h, threads=threads,
                                                                 backend="cython"), args.repeat)
            assert np.array_equal(out, ref), "backends disagree"
            label = f"cython x{threads}"
            print(f"{h:>2} {label:<12} {t:9.3f} {len(pairs) / t:10.0f} {t_py / t:8.1f}")


if __name__ == "__main__":
    main()
