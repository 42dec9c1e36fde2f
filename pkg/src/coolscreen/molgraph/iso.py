"""Exact graph isomorphism by backtracking (VF2-style feasibility checks).

Independent of the canonical ranking code; used as a verification oracle.
"""


def _label(g, i):
    a = g.atoms[i]
    return (a.element, a.aromatic, a.implicit_h, len(g.neighbors[i]))


def is_isomorphic(g1, g2):
    n = len(g1.atoms)
    if n != len(g2.atoms) or len(g1.bonds) != len(g2.bonds):
        return False
    l1 = [_label(g1, i) for i in range(n)]
    l2 = [_label(g2, i) for i in range(n)]
    if sorted(l1, key=repr) != sorted(l2, key=repr):
        return False

    # order g1 atoms so each (after the first of a component) touches a mapped atom
    order = []
    seen = set()
    for s in range(n):
        if s in seen:
            continue
        todo = [s]
        seen.add(s)
        while todo:
            v = todo.pop(0)
            order.append(v)
            for w, _ in g1.neighbors[v]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)

    mapping = {}
    used = set()

    def feasible(u, v):
        if l1[u] != l2[v]:
            return False
        for w, b in g1.neighbors[u]:
            if w in mapping:
                b2 = g2.bond_between(v, mapping[w])
                if b2 is None or b2.order is not b.order:
                    return False
        return True

    def search(k):
        if k == n:
            return True
        u = order[k]
        for v in range(n):
            if v in used or not feasible(u, v):
                continue
            mapping[u] = v
            used.add(v)
            if search(k + 1):
                return True
            del mapping[u]
            used.discard(v)
        return False

    return search(0)
