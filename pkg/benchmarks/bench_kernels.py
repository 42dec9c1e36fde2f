"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N time for each backend and
the speed-up; also checks both backends agree on every input.
"""

import argparse
import timeit

import numpy as np

from coolscreen._kernels import _pyimpl

try:
    from coolscreen._kernels import _ckernels
except ImportError:
    _ckernels = None


def _chain_graph(n, seed=0):
    """Random tree on n atoms in CSR form."""
    rng = np.random.default_rng(seed)
    edges = [(i, int(rng.integers(0, i))) for i in range(1, n)]
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    indptr = np.zeros(n + 1, dtype=np.int32)
    indptr[1:] = np.cumsum([len(x) for x in adj])
    indices = np.array([w for x in adj for w in x], dtype=np.int32)
    return n, indptr, indices


def _edges(n_atoms, n_edges, width, seed=0):
    rng = np.random.default_rng(seed)
    src = rng.integers(0, n_atoms, n_edges).astype(np.int64)
    dst = rng.integers(0, n_atoms, n_edges).astype(np.int64)
    rev = rng.permutation(n_edges).astype(np.int64)
    h = rng.standard_normal((n_edges, width))
    return h, src, dst, rev, n_atoms


def cases():
    nodes, weights = np.polynomial.legendre.leggauss(16)
    return {
        "longest_path (tree, 40 atoms)": (lambda m: m.longest_path, _chain_graph(40)),
        "bvn_rect (16x16 nodes)": (lambda m: m.bvn_rect, (-1.0, 2.0, -0.5, 3.0, -0.3, nodes, weights)),
        "edge_message_sum (5000 edges)": (lambda m: m.edge_message_sum, _edges(2500, 5000, 64)),
    }


def best_time(fn, args, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-7)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':34s} {'python':>12s} {'cython':>12s} {'speed-up':>9s}")
    for name, (get, inputs) in cases().items():
        py = best_time(get(_pyimpl), inputs, args.repeat)
        if _ckernels is None:
            print(f"{name:34s} {py * 1e6:10.1f}us {'-':>12s} {'-':>9s}")
            continue
        a, b = get(_pyimpl)(*inputs), get(_ckernels)(*inputs)
        if not np.allclose(a, b, rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        cy = best_time(get(_ckernels), inputs, args.repeat)
        print(f"{name:34s} {py * 1e6:10.1f}us {cy * 1e6:10.1f}us {py / cy:8.1f}x")


if __name__ == "__main__":
    main()
