"""Canonical atom ranking (Morgan-style refinement) and SMILES writer."""

import sys

from .elements import ELEMENT_ORDER, Element
from .graph import BondOrder

_EL_INDEX = {e: i for i, e in enumerate(ELEMENT_ORDER)}


def _dense_ranks(keys):
    order = sorted(set(keys))
    lookup = {k: r for r, k in enumerate(order)}
    return [lookup[k] for k in keys]


def _refine(g, ranks):
    nb = g.neighbors
    while True:
        keys = [
            (ranks[i], tuple(sorted((b.order.value, ranks[j]) for j, b in nb[i])))
            for i in range(len(ranks))
        ]
        new = _dense_ranks(keys)
        if len(set(new)) == len(set(ranks)):
            return new
        ranks = new


def canonical_ranks(g):
    """Return a permutation ``ranks`` (atom index -> 0..n-1).

    Atom invariants are refined over neighbour ranks until stable; remaining
    ties are broken on the lowest atom index and refinement repeats.
    """
    nb = g.neighbors
    init = [
        (
            _EL_INDEX[a.element],
            a.aromatic,
            len(nb[i]),
            a.implicit_h,
            tuple(sorted(b.order.value for _, b in nb[i])),
        )
        for i, a in enumerate(g.atoms)
    ]
    ranks = _refine(g, _dense_ranks(init))
    n = len(ranks)
    while len(set(ranks)) < n:
        counts = {}
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = min(r for r, c in counts.items() if c > 1)
        pick = min(i for i in range(n) if ranks[i] == tied)
        # split the picked atom off below its tied partners
        ranks = _dense_ranks([(2 * r + (0 if i == pick or r != tied else 1)) for i, r in enumerate(ranks)])
        ranks = _refine(g, ranks)
    return ranks


def _atom_token(atom):
    sym = atom.element.symbol
    if atom.aromatic:
        return sym.lower()
    if atom.element is Element.Si:
        return "[Si]"
    return sym


def _bond_token(g, a, b, bond):
    if bond.order is BondOrder.AROMATIC:
        return ""
    if bond.order is BondOrder.SINGLE:
        return "-" if g.atoms[a].aromatic and g.atoms[b].aromatic else ""
    return bond.order.symbol


def _ring_label(d):
    return str(d) if d < 10 else f"%{d:02d}"


def write_smiles(g, ranks=None):
    """Deterministic canonical SMILES for ``g``."""
    if ranks is None:
        ranks = canonical_ranks(g)
    n = len(g.atoms)
    nb_sorted = [sorted(g.neighbors[i], key=lambda t: ranks[t[0]]) for i in range(n)]
    start = min(range(n), key=lambda i: ranks[i])

    # pass 1: DFS tree, children order and ring-closure edges
    visited = [False] * n
    children = [[] for _ in range(n)]
    opens = [[] for _ in range(n)]  # (partner, bond) where this atom opens the ring bond
    closes = [[] for _ in range(n)]
    closure_seen = set()
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * n + 100))

    def dfs(v, parent):
        visited[v] = True
        for w, bond in nb_sorted[v]:
            if w == parent:
                continue
            if not visited[w]:
                children[v].append((w, bond))
                dfs(w, v)
            else:
                key = (min(v, w), max(v, w))
                if key in closure_seen or any(c == w for c, _ in children[v]):
                    continue
                closure_seen.add(key)
                opens[w].append((v, bond))
                closes[v].append((w, bond))

    try:
        dfs(start, -1)
    finally:
        sys.setrecursionlimit(old_limit)

    out = []
    free = list(range(1, 100))
    live = {}

    def emit(v):
        out.append(_atom_token(g.atoms[v]))
        for w, bond in sorted(closes[v], key=lambda t: ranks[t[0]]):
            d = live.pop((w, v))
            out.append(_bond_token(g, v, w, bond) + _ring_label(d))
            free.append(d)
            free.sort()
        for w, bond in sorted(opens[v], key=lambda t: ranks[t[0]]):
            d = free.pop(0)
            live[(v, w)] = d
            out.append(_ring_label(d))
        kids = children[v]
        for k, (w, bond) in enumerate(kids):
            last = k == len(kids) - 1
            if not last:
                out.append("(")
            out.append(_bond_token(g, v, w, bond))
            emit(w)
            if not last:
                out.append(")")

    sys.setrecursionlimit(max(old_limit, 4 * n + 100))
    try:
        emit(start)
    finally:
        sys.setrecursionlimit(old_limit)
    return "".join(out)


def canonical_smiles(g):
    return write_smiles(g)
