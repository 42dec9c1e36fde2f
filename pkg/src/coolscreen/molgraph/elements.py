"""Element table for the supported SMILES subset."""

from enum import Enum


class Element(Enum):
    B = ("B", 10.811, 3)
    C = ("C", 12.011, 4)
    N = ("N", 14.007, 3)
    O = ("O", 15.999, 2)
    F = ("F", 18.998, 1)
    Si = ("Si", 28.086, 4)
    P = ("P", 30.974, 3)
    S = ("S", 32.065, 2)
    Cl = ("Cl", 35.453, 1)
    Br = ("Br", 79.904, 1)
    I = ("I", 126.904, 1)  # noqa: E741

    def __init__(self, symbol, atomic_mass, default_valence):
        self.symbol = symbol
        self.atomic_mass = atomic_mass
        self.default_valence = default_valence

    def __repr__(self):
        return f"Element.{self.symbol}"

    @classmethod
    def from_symbol(cls, symbol):
        return _BY_SYMBOL[symbol]


_BY_SYMBOL = {e.symbol: e for e in Element}

HYDROGEN_MASS = 1.008

# elements allowed to carry the aromatic flag (lowercase in SMILES)
AROMATIC_ELEMENTS = frozenset({Element.C, Element.N, Element.O, Element.S})

# fixed ordering used by featurizers and CSV dumps
ELEMENT_ORDER = tuple(Element)
