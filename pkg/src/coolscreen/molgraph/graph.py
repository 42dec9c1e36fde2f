"""Immutable molecular graph with implicit hydrogens."""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

from .elements import AROMATIC_ELEMENTS, Element
from .errors import DisconnectedInput, SmilesError, ValenceViolation


class BondOrder(Enum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self):
        """Valence units consumed on each endpoint.

        Aromatic bonds count 1 here; the extra pi unit is charged to the
        atom (see :func:`implicit_hydrogens`).
        """
        return 1 if self is BondOrder.AROMATIC else self.value

    @property
    def symbol(self):
        return {1: "-", 2: "=", 3: "#", 4: ""}[self.value]


@dataclass(frozen=True)
class Atom:
    element: Element
    aromatic: bool = False
    implicit_h: int = 0


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder = BondOrder.SINGLE

    def other(self, idx):
        return self.end if idx == self.begin else self.begin


def _pi_unit(element, aromatic):
    # aromatic C and N take part in a ring double bond; O and S donate a lone pair
    return 1 if aromatic and element in (Element.C, Element.N) else 0


def used_valence(element, aromatic, orders):
    return sum(o.valence for o in orders) + _pi_unit(element, aromatic)


@dataclass(frozen=True)
class MolGraph:
    """Connected molecular graph over heavy atoms.

    Build through :meth:`from_parts` (or the SMILES parser) so implicit
    hydrogen counts and the structural invariants are enforced.
    """

    atoms: tuple
    bonds: tuple
    _pairs: dict = field(default=None, repr=False, compare=False, hash=False)

    @classmethod
    def from_parts(cls, atom_specs, bonds, offsets=None):
        """Create a graph from ``(element, aromatic)`` pairs and bonds.

        ``offsets`` optionally maps atom index -> SMILES byte offset for error
        reporting.  Raises :class:`ValenceViolation` or
        :class:`DisconnectedInput`.
        """
        atom_specs = list(atom_specs)
        bonds = tuple(b if isinstance(b, Bond) else Bond(*b) for b in bonds)
        n = len(atom_specs)
        if n == 0:
            raise SmilesError("empty molecule", 0 if offsets is not None else None)
        pairs = {}
        orders = [[] for _ in range(n)]
        for bi, b in enumerate(bonds):
            if b.begin == b.end or not (0 <= b.begin < n and 0 <= b.end < n):
                raise SmilesError(f"invalid bond endpoints ({b.begin}, {b.end})")
            key = (min(b.begin, b.end), max(b.begin, b.end))
            if key in pairs:
                raise SmilesError(f"parallel bond between atoms {key}")
            pairs[key] = bi
            orders[b.begin].append(b.order)
            orders[b.end].append(b.order)
        atoms = []
        for i, (element, aromatic) in enumerate(atom_specs):
            if aromatic and element not in AROMATIC_ELEMENTS:
                raise SmilesError(f"{element.symbol} cannot be aromatic")
            h = element.default_valence - used_valence(element, aromatic, orders[i])
            if h < 0:
                off = offsets[i] if offsets is not None else None
                raise ValenceViolation(
                    f"atom {i} ({element.symbol}) exceeds valence {element.default_valence}", off
                )
            atoms.append(Atom(element, bool(aromatic), h))
        g = cls(tuple(atoms), bonds, pairs)
        if n > 1 and len(g.component_of(0)) != n:
            missing = min(set(range(n)) - g.component_of(0))
            off = offsets[missing] if offsets is not None else None
            raise DisconnectedInput("molecule has more than one fragment", off)
        return g

    def __post_init__(self):
        if self._pairs is None:
            pairs = {(min(b.begin, b.end), max(b.begin, b.end)): i for i, b in enumerate(self.bonds)}
            object.__setattr__(self, "_pairs", pairs)

    def __len__(self):
        return len(self.atoms)

    @property
    def n_atoms(self):
        return len(self.atoms)

    @cached_property
    def neighbors(self):
        """``neighbors[i]`` is a tuple of ``(j, bond)`` pairs."""
        nb = [[] for _ in self.atoms]
        for b in self.bonds:
            nb[b.begin].append((b.end, b))
            nb[b.end].append((b.begin, b))
        return tuple(tuple(x) for x in nb)

    def degree(self, i):
        return len(self.neighbors[i])

    def bond_between(self, i, j):
        bi = self._pairs.get((min(i, j), max(i, j)))
        return None if bi is None else self.bonds[bi]

    def component_of(self, start):
        seen = {start}
        todo = [start]
        nb = self.neighbors
        while todo:
            v = todo.pop()
            for w, _ in nb[v]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen

    @cached_property
    def ring_info(self):
        from .rings import find_rings

        return find_rings(self)

    @cached_property
    def csr(self):
        """Adjacency as ``(indptr, indices)`` int32 arrays."""
        import numpy as np

        indptr = np.zeros(len(self.atoms) + 1, dtype=np.intc)
        indices = []
        for i, nb in enumerate(self.neighbors):
            indices.extend(j for j, _ in nb)
            indptr[i + 1] = len(indices)
        return indptr, np.asarray(indices, dtype=np.intc)

    def specs(self):
        return [(a.element, a.aromatic) for a in self.atoms]
