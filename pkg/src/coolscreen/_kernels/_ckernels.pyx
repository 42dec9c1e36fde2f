# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Signatures mirror ``_pyimpl`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, M_PI

cnp.import_array()


def longest_path(int n, const int[:] indptr, const int[:] indices):
    """Vertex count of the longest simple path (exhaustive DFS)."""
    if n == 0:
        return 0
    cdef int best = 1, start, depth, v, w, k
    cdef int[:] visited = np.zeros(n, dtype=np.intc)
    cdef int[:] stack_v = np.zeros(n, dtype=np.intc)
    cdef int[:] stack_k = np.zeros(n, dtype=np.intc)
    for start in range(n):
        depth = 0
        stack_v[0] = start
        stack_k[0] = indptr[start]
        visited[start] = 1
        while depth >= 0:
            v = stack_v[depth]
            k = stack_k[depth]
            if k < indptr[v + 1]:
                stack_k[depth] = k + 1
                w = indices[k]
                if not visited[w]:
                    depth += 1
                    stack_v[depth] = w
                    stack_k[depth] = indptr[w]
                    visited[w] = 1
                    if depth + 1 > best:
                        best = depth + 1
                        if best == n:
                            return best
            else:
                visited[v] = 0
                depth -= 1
    return best


def bvn_rect(double x0, double x1, double y0, double y1, double rho,
             const double[:] nodes, const double[:] weights):
    """Tensor Gauss-Legendre integral of the standard bivariate normal
    density with correlation ``rho`` over [x0,x1] x [y0,y1]."""
    cdef Py_ssize_t i, j, q = nodes.shape[0]
    cdef double hx = 0.5 * (x1 - x0), cx = 0.5 * (x1 + x0)
    cdef double hy = 0.5 * (y1 - y0), cy = 0.5 * (y1 + y0)
    cdef double om = 1.0 - rho * rho
    cdef double norm = 1.0 / (2.0 * M_PI * sqrt(om))
    cdef double x, y, acc = 0.0, row
    for i in range(q):
        x = cx + hx * nodes[i]
        row = 0.0
        for j in range(q):
            y = cy + hy * nodes[j]
            row += weights[j] * exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * om))
        acc += weights[i] * row
    return acc * hx * hy * norm


def edge_message_sum(const double[:, :] h, const cnp.int64_t[:] src, const cnp.int64_t[:] dst,
                     const cnp.int64_t[:] rev, int n_atoms):
    """m[e] = sum of h[k] over edges k entering src[e], excluding rev[e]."""
    cdef Py_ssize_t n_edges = h.shape[0], width = h.shape[1], e, c
    cdef double[:, :] incoming = np.zeros((n_atoms, width))
    out_arr = np.empty((n_edges, width))
    cdef double[:, :] out = out_arr
    for e in range(n_edges):
        for c in range(width):
            incoming[dst[e], c] += h[e, c]
    for e in range(n_edges):
        for c in range(width):
            out[e, c] = incoming[src[e], c] - h[rev[e], c]
    return out_arr
