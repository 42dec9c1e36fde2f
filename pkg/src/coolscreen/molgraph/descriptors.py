"""Structural descriptors."""

from dataclasses import dataclass

from .._kernels import longest_path
from .elements import HYDROGEN_MASS, Element

CSV_HEADER = "smiles,mw,heavy,longest_chain,branching,frac_C,frac_O,frac_Si,frac_other"


@dataclass(frozen=True)
class Descriptors:
    molecular_weight: float
    heavy_atom_count: int
    longest_chain: int
    branching_degree: float
    element_fractions: dict

    def csv_row(self, smiles):
        fr = self.element_fractions
        c, o, si = fr.get(Element.C, 0.0), fr.get(Element.O, 0.0), fr.get(Element.Si, 0.0)
        other = sum(v for e, v in fr.items() if e not in (Element.C, Element.O, Element.Si))
        return (
            f"{smiles},{self.molecular_weight:.3f},{self.heavy_atom_count},{self.longest_chain},"
            f"{self.branching_degree:.6f},{c:.6f},{o:.6f},{si:.6f},{other:.6f}"
        )


def molecular_weight(g):
    return sum(a.element.atomic_mass + a.implicit_h * HYDROGEN_MASS for a in g.atoms)


def longest_chain(g):
    """Heavy atoms on the longest simple path; may run through rings."""
    indptr, indices = g.csr
    return int(longest_path(len(g.atoms), indptr, indices))


def descriptors(g):
    n = len(g.atoms)
    counts = {}
    for a in g.atoms:
        counts[a.element] = counts.get(a.element, 0) + 1
    branched = sum(1 for i in range(n) if g.degree(i) >= 3)
    return Descriptors(
        molecular_weight=molecular_weight(g),
        heavy_atom_count=n,
        longest_chain=longest_chain(g),
        branching_degree=branched / n,
        element_fractions={e: c / n for e, c in counts.items()},
    )
