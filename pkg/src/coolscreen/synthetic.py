"""Seeded random molecules for desk-scale experiments.

Skeletons are saturated or mono-unsaturated chains with optional ether
oxygens, siloxane silicon, amine nitrogen, carbonyls and 5-7 membered
carbocycles.  All outputs pass the structure prefilter; reactant generators
attach exactly one OH, C(=O)OH or sp3 Cl.
"""

from .molgraph import BondOrder, Element, MolGraph, write_smiles
from .molgraph.graph import used_valence

C, O, N, Si, Cl = Element.C, Element.O, Element.N, Element.Si, Element.Cl


class _Builder:
    def __init__(self):
        self.specs = []
        self.bonds = {}

    def add(self, element, attach=None, order=BondOrder.SINGLE):
        idx = len(self.specs)
        self.specs.append(element)
        if attach is not None:
            self.bonds[(attach, idx)] = order
        return idx

    def orders(self, i):
        return [o for (a, b), o in self.bonds.items() if i in (a, b)]

    def free(self, i):
        return self.specs[i].default_valence - used_valence(self.specs[i], False, self.orders(i))

    def neighbors(self, i):
        return [b if a == i else a for (a, b) in self.bonds if i in (a, b)]

    def distances(self, start):
        dist = {start: 0}
        todo = [start]
        while todo:
            v = todo.pop(0)
            for w in self.neighbors(v):
                if w not in dist:
                    dist[w] = dist[v] + 1
                    todo.append(w)
        return dist

    def graph(self):
        return MolGraph.from_parts(
            [(e, False) for e in self.specs],
            [(a, b, o) for (a, b), o in self.bonds.items()],
        )


def _carbons_with(b, need, sp3=False):
    out = []
    for i, e in enumerate(b.specs):
        if e is not C or b.free(i) < need:
            continue
        if sp3 and any(o is not BondOrder.SINGLE for o in b.orders(i)):
            continue
        # a carbonyl carbon or one next to O would make acid/ester-like motifs
        if any(b.specs[j] is O for j in b.neighbors(i)) and need >= 1 and sp3:
            continue
        out.append(i)
    return out


def random_skeleton(rng, min_atoms=3, max_atoms=18, p_ring=0.15, p_double=0.2, p_carbonyl=0.15):
    """Skeleton builder; returns the internal builder so callers can attach
    groups before freezing it into a graph."""
    target = int(rng.integers(min_atoms, max_atoms + 1))
    b = _Builder()
    b.add(C)
    while len(b.specs) < target:
        r = rng.random()
        anchors = [i for i, e in enumerate(b.specs) if e is not O and b.free(i) >= 1]
        if not anchors:
            break
        at = anchors[int(rng.integers(len(anchors)))]
        if r < 0.12 and len(b.specs) + 2 <= target + 1 and b.specs[at] is C:
            o = b.add(O, at)
            b.add(C, o)
        elif r < 0.17 and b.specs[at] is C:
            # siloxane unit: Si(C)(C)-O-C
            si = b.add(Si, at)
            b.add(C, si)
            b.add(C, si)
            o = b.add(O, si)
            b.add(C, o)
        elif r < 0.20 and b.specs[at] is C:
            b.add(N, at)
        else:
            b.add(C, at)
    if rng.random() < p_ring and len(b.specs) >= 6:
        carbons = [i for i, e in enumerate(b.specs) if e is C and b.free(i) >= 1]
        rng.shuffle(carbons)
        for i in carbons:
            dist = b.distances(i)
            options = [j for j in carbons if j > i and 4 <= dist.get(j, 0) <= 6]
            if options:
                j = options[int(rng.integers(len(options)))]
                b.bonds[(i, j)] = BondOrder.SINGLE
                break
    if rng.random() < p_double:
        pairs = [
            (a, c)
            for (a, c), o in b.bonds.items()
            if o is BondOrder.SINGLE and b.specs[a] is C and b.specs[c] is C and b.free(a) >= 1 and b.free(c) >= 1
        ]
        if pairs:
            key = pairs[int(rng.integers(len(pairs)))]
            b.bonds[key] = BondOrder.DOUBLE
    if rng.random() < p_carbonyl:
        sites = [
            i for i in _carbons_with(b, 2)
            if len(b.neighbors(i)) >= 2 and not any(b.specs[j] in (O, N) for j in b.neighbors(i))
        ]
        if sites:
            b.add(O, sites[int(rng.integers(len(sites)))], BondOrder.DOUBLE)
    return b


def random_molecules(n, rng, **kw):
    """``n`` distinct random molecules (deduplicated by canonical SMILES)."""
    seen = {}
    attempts = 0
    while len(seen) < n:
        attempts += 1
        if attempts > 50 * n + 100:
            raise RuntimeError("could not generate enough distinct molecules")
        g = random_skeleton(rng, **kw).graph()
        s = write_smiles(g)
        seen.setdefault(s, g)
    return list(seen.values())


def _attach(b, role, rng):
    if role == "alcohol":
        sites = [i for i in _carbons_with(b, 1, sp3=True)]
        if not sites:
            return False
        b.add(O, sites[int(rng.integers(len(sites)))])
    elif role == "chloride":
        sites = _carbons_with(b, 1, sp3=True)
        if not sites:
            return False
        b.add(Cl, sites[int(rng.integers(len(sites)))])
    elif role == "acid":
        sites = _carbons_with(b, 1, sp3=True)
        if not sites:
            return False
        c = b.add(C, sites[int(rng.integers(len(sites)))])
        b.add(O, c, BondOrder.DOUBLE)
        b.add(O, c)
    else:
        raise ValueError(role)
    return True


def random_reactants(n, role, rng, min_atoms=2, max_atoms=12, **kw):
    """``n`` distinct single-site reactants of ``role``."""
    from .reactor import classify_reactant
    from .molgraph import detect_groups

    key = {"alcohol": "alcohol", "chloride": "alkyl_chloride", "acid": "carboxylic_acid"}[role]
    seen = {}
    attempts = 0
    while len(seen) < n:
        attempts += 1
        if attempts > 100 * n + 100:
            raise RuntimeError(f"could not generate {n} {role} reactants")
        b = random_skeleton(rng, min_atoms=min_atoms, max_atoms=max_atoms, **kw)
        if not _attach(b, role, rng):
            continue
        g = b.graph()
        prof = detect_groups(g)
        if classify_reactant(g, prof) != {role} or len(getattr(prof, key)) != 1:
            continue
        s = write_smiles(g)
        seen.setdefault(s, g)
    return list(seen.values())
