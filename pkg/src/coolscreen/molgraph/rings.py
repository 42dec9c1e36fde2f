"""Ring perception: chordless cycles up to a size limit, completed to a
cycle basis when larger rings are present."""

from dataclasses import dataclass

from .graph import BondOrder

MAX_CHORDLESS = 8


@dataclass(frozen=True)
class Ring:
    atoms: tuple  # cyclic order, starting at the smallest index
    aromatic: bool

    def __len__(self):
        return len(self.atoms)


def _normalize(cycle):
    k = cycle.index(min(cycle))
    c = cycle[k:] + cycle[:k]
    if len(c) > 2 and c[-1] < c[1]:
        c = [c[0]] + c[1:][::-1]
    return tuple(c)


def chordless_cycles(g, max_size=MAX_CHORDLESS):
    adj = [set(j for j, _ in nb) for nb in g.neighbors]
    found = set()
    for s in range(len(adj)):
        # paths s -> ... with all other vertices > s, kept induced
        stack = [[s]]
        while stack:
            path = stack.pop()
            last = path[-1]
            for w in adj[last]:
                if w == s and len(path) >= 3:
                    found.add(_normalize(path))
                    continue
                if w <= s or w in path or len(path) >= max_size:
                    continue
                # w must not touch interior path vertices (chord)
                if any(w in adj[p] for p in path[1:-1]):
                    continue
                # w adjacent to s closes the cycle at once; only allowed as the final step
                if s in adj[w] and len(path) >= 2:
                    cyc = path + [w]
                    if len(cyc) >= 3:
                        found.add(_normalize(cyc))
                    continue
                stack.append(path + [w])
    return sorted(found, key=lambda c: (len(c), c))


def _edge_mask(cycle, edge_bit):
    m = 0
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        m |= edge_bit[(min(a, b), max(a, b))]
    return m


def _reduce(vec, basis):
    # basis: dict pivot_bit -> vector (GF(2) elimination)
    while vec:
        top = vec.bit_length() - 1
        if top not in basis:
            return vec
        vec ^= basis[top]
    return 0


def _fundamental_cycles(g):
    n = len(g.atoms)
    parent = [-1] * n
    depth = [0] * n
    seen = [False] * n
    tree = set()
    seen[0] = True
    queue = [0]
    while queue:
        v = queue.pop(0)
        for w, _ in g.neighbors[v]:
            if not seen[w]:
                seen[w] = True
                parent[w] = v
                depth[w] = depth[v] + 1
                tree.add((min(v, w), max(v, w)))
                queue.append(w)
    cycles = []
    for b in g.bonds:
        key = (min(b.begin, b.end), max(b.begin, b.end))
        if key in tree:
            continue
        a, c = b.begin, b.end
        left, right = [a], [c]
        while left[-1] != right[-1]:
            if depth[left[-1]] >= depth[right[-1]]:
                left.append(parent[left[-1]])
            else:
                right.append(parent[right[-1]])
        cycles.append(left + right[-2::-1])
    return cycles


def find_rings(g):
    n_cycles = len(g.bonds) - len(g.atoms) + 1
    if n_cycles <= 0:
        return ()
    edge_bit = {}
    for i, b in enumerate(g.bonds):
        edge_bit[(min(b.begin, b.end), max(b.begin, b.end))] = 1 << i
    rings = list(chordless_cycles(g))
    basis = {}
    for c in rings:
        v = _reduce(_edge_mask(list(c), edge_bit), basis)
        if v:
            basis[v.bit_length() - 1] = v
    if len(basis) < n_cycles:
        for c in sorted(_fundamental_cycles(g), key=len):
            v = _reduce(_edge_mask(c, edge_bit), basis)
            if v:
                basis[v.bit_length() - 1] = v
                rings.append(_normalize(c))
    out = []
    for c in rings:
        arom = all(g.atoms[i].aromatic for i in c) and all(
            g.bond_between(a, b).order is BondOrder.AROMATIC for a, b in zip(c, c[1:] + c[:1])
        )
        out.append(Ring(tuple(c), arom))
    return tuple(out)


def ring_atoms(g):
    """Chordless cycles (<= 8 atoms) plus basis completion; see :class:`Ring`."""
    return list(g.ring_info)
