"""Pure-Python/numpy versions of the compiled kernels."""

import math

import numpy as np


def longest_path(n, indptr, indices):
    if n == 0:
        return 0
    adj = [list(indices[indptr[v]:indptr[v + 1]]) for v in range(n)]
    best = 1
    visited = [False] * n
    for start in range(n):
        visited[start] = True
        stack = [(start, iter(adj[start]))]
        while stack:
            v, it = stack[-1]
            w = next(it, None)
            if w is None:
                visited[v] = False
                stack.pop()
            elif not visited[w]:
                visited[w] = True
                stack.append((w, iter(adj[w])))
                if len(stack) > best:
                    best = len(stack)
                    if best == n:
                        return best
    return best


def bvn_rect(x0, x1, y0, y1, rho, nodes, weights):
    hx, cx = 0.5 * (x1 - x0), 0.5 * (x1 + x0)
    hy, cy = 0.5 * (y1 - y0), 0.5 * (y1 + y0)
    x = cx + hx * np.asarray(nodes)
    y = cy + hy * np.asarray(nodes)
    om = 1.0 - rho * rho
    q = (x[:, None] ** 2 - 2.0 * rho * x[:, None] * y[None, :] + y[None, :] ** 2) / (2.0 * om)
    w = np.asarray(weights)
    val = float(w @ np.exp(-q) @ w)
    return val * hx * hy / (2.0 * math.pi * math.sqrt(om))


def edge_message_sum(h, src, dst, rev, n_atoms):
    incoming = np.zeros((n_atoms, h.shape[1]))
    np.add.at(incoming, dst, h)
    return incoming[src] - h[rev]
