"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--n 20000]
"""
import argparse
import timeit

import numpy as np

from cautraj.kernels import available_backends, get_backend


def full_tree(depth, n_features, rng):
    """Complete binary tree in flat-array form with random splits."""
    n_internal = 2 ** depth - 1
    n_nodes = 2 ** (depth + 1) - 1
    feature = np.full(n_nodes, -1, dtype=np.intp)
    feature[:n_internal] = rng.integers(0, n_features, n_internal)
    threshold = rng.normal(size=n_nodes)
    left = np.full(n_nodes, -1, dtype=np.intp)
    right = np.full(n_nodes, -1, dtype=np.intp)
    idx = np.arange(n_internal)
    left[:n_internal], right[:n_internal] = 2 * idx + 1, 2 * idx + 2
    return feature, threshold, left, right, rng.normal(size=n_nodes)


def workloads(n, seed=0):
    rng = np.random.default_rng(seed)
    p, n_bins = 20, 64
    binned = rng.integers(0, n_bins, (n, p)).astype(np.uint16)
    grad = rng.normal(size=n)
    rows = np.sort(rng.choice(n, n // 2, replace=False)).astype(np.intp)
    X = rng.normal(size=(n, p))
    tree = full_tree(6, p, rng)
    m = min(n, 4000)
    x, yr, tr = rng.uniform(-1, 1, m), rng.normal(size=m), rng.normal(size=m)
    return {
        "build_histogram": lambda k: k.build_histogram(binned, grad, rows, n_bins),
        "apply_tree": lambda k: k.apply_tree(X, *tree),
        "local_theta": lambda k: k.local_theta(x, x, yr, tr, 0.2),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="rows per workload")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; timing the fallback only")
    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in workloads(args.n).items():
        best = {}
        for b in backends:
            k = get_backend(b)
            fn(k)  # warm up
            best[b] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        line = f"{name:<16}" + "".join(f"{best[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{best['python'] / best['cython']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
