import os
import subprocess
import sys

import numpy as np
import pytest

from coolscreen import _kernels
from coolscreen._kernels import _pyimpl
from coolscreen.molgraph import parse_smiles
from coolscreen.synthetic import random_molecules

try:
    from coolscreen._kernels import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def _csr(g):
    n = len(g.atoms)
    adj = [[] for _ in range(n)]
    for b in g.bonds:
        adj[b.begin].append(b.end)
        adj[b.end].append(b.begin)
    indptr = np.zeros(n + 1, dtype=np.int32)
    indptr[1:] = np.cumsum([len(a) for a in adj])
    return n, indptr, np.array([w for a in adj for w in a], dtype=np.int32)


def test_backend_flag():
    assert _kernels.BACKEND in ("cython", "python")
    assert _kernels.BACKEND == ("cython" if _ckernels is not None else "python")


def test_pure_python_override():
    code = "from coolscreen import _kernels; print(_kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={**os.environ, "COOLSCREEN_PURE_PYTHON": "1"})
    assert out.stdout.strip() == "python"


def test_longest_path_examples():
    for smiles, expected in (("C", 1), ("CCCC", 4), ("CC(C)C", 3), ("C1CCCCC1", 6), ("CCC(CC)CCC", 6)):
        assert _pyimpl.longest_path(*_csr(parse_smiles(smiles))) == expected
    assert _pyimpl.longest_path(0, np.zeros(1, np.int32), np.zeros(0, np.int32)) == 0


@needs_ext
def test_longest_path_backends_agree():
    for g in random_molecules(150, np.random.default_rng(0), min_atoms=1, max_atoms=20):
        args = _csr(g)
        assert _ckernels.longest_path(*args) == _pyimpl.longest_path(*args)


@needs_ext
def test_bvn_rect_backends_agree():
    nodes, weights = np.polynomial.legendre.leggauss(16)
    rng = np.random.default_rng(1)
    for _ in range(50):
        x0, y0 = rng.uniform(-4, 2, 2)
        x1, y1 = x0 + rng.uniform(0.1, 4), y0 + rng.uniform(0.1, 4)
        rho = rng.uniform(-0.95, 0.95)
        a = _ckernels.bvn_rect(x0, x1, y0, y1, rho, nodes, weights)
        b = _pyimpl.bvn_rect(x0, x1, y0, y1, rho, nodes, weights)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


@needs_ext
def test_edge_message_sum_backends_agree():
    rng = np.random.default_rng(2)
    n_atoms, n_edges = 30, 80
    src = rng.integers(0, n_atoms, n_edges).astype(np.int64)
    dst = rng.integers(0, n_atoms, n_edges).astype(np.int64)
    rev = rng.permutation(n_edges).astype(np.int64)
    h = rng.standard_normal((n_edges, 7))
    assert np.allclose(_ckernels.edge_message_sum(h, src, dst, rev, n_atoms),
                       _pyimpl.edge_message_sum(h, src, dst, rev, n_atoms), atol=1e-12, rtol=0)


def test_benchmark_script_runs():
    out = subprocess.run([sys.executable, os.path.join(os.path.dirname(__file__), "..", "benchmarks",
                                                       "bench_kernels.py"), "--repeat", "1"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "edge_message_sum" in out.stdout
