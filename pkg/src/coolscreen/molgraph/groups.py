"""Functional-group detection by explicit subgraph patterns."""

from dataclasses import dataclass

from .elements import Element
from .graph import BondOrder

_S, _D = BondOrder.SINGLE, BondOrder.DOUBLE


@dataclass(frozen=True)
class FunctionalGroupProfile:
    """Site lists are tuples of atom indices:

    * alcohol: (O, C)
    * carboxylic_acid: (C, O_carbonyl, O_hydroxyl)
    * alkyl_chloride: (C, Cl)
    * ether: (C, O, C)
    * ester: (C_carbonyl, O_carbonyl, O_link, C_alkyl)
    * siloxane: (Si, O)
    * aromatic_rings: ring atom tuples
    """

    alcohol: tuple
    carboxylic_acid: tuple
    alkyl_chloride: tuple
    ether: tuple
    ester: tuple
    siloxane: tuple
    aromatic_rings: tuple
    contains: frozenset

    @property
    def has_alcohol(self):
        return bool(self.alcohol)

    @property
    def has_acid(self):
        return bool(self.carboxylic_acid)

    @property
    def has_chloride(self):
        return bool(self.alkyl_chloride)

    @property
    def has_ether(self):
        return bool(self.ether)

    @property
    def has_ester(self):
        return bool(self.ester)

    @property
    def has_siloxane(self):
        return bool(self.siloxane)

    @property
    def has_aromatic_ring(self):
        return bool(self.aromatic_rings)


def _carbonyl_oxygen(g, c):
    """Index of an O double-bonded to carbon ``c``, else None."""
    for w, b in g.neighbors[c]:
        if b.order is _D and g.atoms[w].element is Element.O:
            return w
    return None


def _is_sp3_carbon(g, c):
    a = g.atoms[c]
    return a.element is Element.C and not a.aromatic and all(b.order is _S for _, b in g.neighbors[c])


def detect_groups(g):
    atoms = g.atoms
    nb = g.neighbors
    alcohol, acid, chloride, ether, ester, siloxane = [], [], [], [], [], []
    for i, a in enumerate(atoms):
        el = a.element
        if el is Element.O and not a.aromatic:
            heavy = nb[i]
            if len(heavy) == 1 and a.implicit_h == 1:
                c, b = heavy[0]
                if atoms[c].element is Element.C and b.order is _S:
                    oc = _carbonyl_oxygen(g, c)
                    if oc is not None:
                        acid.append((c, oc, i))
                    else:
                        alcohol.append((i, c))
            elif len(heavy) == 2 and all(b.order is _S for _, b in heavy):
                (c1, _), (c2, _) = heavy
                if atoms[c1].element is Element.C and atoms[c2].element is Element.C:
                    o1, o2 = _carbonyl_oxygen(g, c1), _carbonyl_oxygen(g, c2)
                    if o1 is None and o2 is None:
                        ether.append((min(c1, c2), i, max(c1, c2)))
                    else:
                        # each carbonyl side forms its own ester linkage (anhydrides give two)
                        for cc, oc, other in ((c1, o1, c2), (c2, o2, c1)):
                            if oc is not None:
                                ester.append((cc, oc, i, other))
            for w, _ in heavy:
                if atoms[w].element is Element.Si:
                    siloxane.append((w, i))
        elif el is Element.Cl:
            for c, b in nb[i]:
                if _is_sp3_carbon(g, c):
                    chloride.append((c, i))
    rings = tuple(r.atoms for r in g.ring_info if r.aromatic)
    return FunctionalGroupProfile(
        alcohol=tuple(alcohol),
        carboxylic_acid=tuple(acid),
        alkyl_chloride=tuple(chloride),
        ether=tuple(ether),
        ester=tuple(ester),
        siloxane=tuple(sorted(siloxane)),
        aromatic_rings=rings,
        contains=frozenset(a.element for a in atoms),
    )
