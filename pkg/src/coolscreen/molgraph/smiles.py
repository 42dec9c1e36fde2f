"""SMILES subset parser.

Supported: organic-subset atoms (B C N O F P S Cl Br I), ``[Si]`` and other
bare bracket elements, aromatic ``c n o s``, branches, ring closures ``1-9``
and ``%nn``, bonds ``- = #``.  No stereo, charges, isotopes or explicit
hydrogen counts.
"""

from .elements import Element
from .errors import (
    DisconnectedInput,
    UnclosedBranch,
    UnmatchedRingBond,
    UnsupportedToken,
)
from .graph import Bond, BondOrder, MolGraph

_ORGANIC = {
    "B": Element.B,
    "C": Element.C,
    "N": Element.N,
    "O": Element.O,
    "F": Element.F,
    "P": Element.P,
    "S": Element.S,
    "Cl": Element.Cl,
    "Br": Element.Br,
    "I": Element.I,
}
_AROMATIC = {"c": Element.C, "n": Element.N, "o": Element.O, "s": Element.S}
_BOND = {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE, "#": BondOrder.TRIPLE}


def _byte_offsets(text):
    offs = []
    pos = 0
    for ch in text:
        offs.append(pos)
        pos += len(ch.encode("utf-8"))
    offs.append(pos)
    return offs


def parse_smiles(text):
    """Parse ``text`` into a :class:`MolGraph`.

    Raises a :class:`~coolscreen.molgraph.errors.SmilesError` subclass whose
    ``offset`` is the byte position of the offending token.
    """
    boff = _byte_offsets(text)
    specs = []
    atom_offsets = []
    bonds = []
    bonded = set()
    branch_stack = []  # (atom index, byte offset of '(')
    rings = {}  # ring number -> (atom, bond order or None, offset)
    prev = None
    pending = None  # (BondOrder, offset)
    i = 0
    n = len(text)

    def add_bond(a, b, order, off, ring=False):
        key = (min(a, b), max(a, b))
        if a == b or key in bonded:
            raise UnmatchedRingBond("ring closure duplicates an existing bond", off)
        bonded.add(key)
        if order is None:
            both_arom = specs[a][1] and specs[b][1]
            order = BondOrder.AROMATIC if both_arom else BondOrder.SINGLE
        bonds.append(Bond(a, b, order))

    while i < n:
        ch = text[i]
        off = boff[i]
        atom = None
        if ch == "(":
            if prev is None:
                raise UnsupportedToken("branch before any atom", off)
            if pending is not None:
                raise UnsupportedToken("bond symbol before branch", pending[1])
            branch_stack.append((prev, off))
            i += 1
            if i < n and text[i] == ")":
                raise UnsupportedToken("empty branch", boff[i])
            continue
        if ch == ")":
            if not branch_stack:
                raise UnclosedBranch("unmatched ')'", off)
            if pending is not None:
                raise UnsupportedToken("dangling bond symbol", pending[1])
            prev = branch_stack.pop()[0]
            i += 1
            continue
        if ch in _BOND:
            if prev is None or pending is not None:
                raise UnsupportedToken(f"unexpected bond symbol {ch!r}", off)
            pending = (_BOND[ch], off)
            i += 1
            continue
        if ch.isdigit() or ch == "%":
            if prev is None:
                raise UnsupportedToken("ring closure before any atom", off)
            if ch == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise UnsupportedToken("'%' must be followed by two digits", off)
                num = int(digits)
                i += 3
            else:
                num = int(ch)
                if num == 0:
                    raise UnsupportedToken("ring number 0 is not supported", off)
                i += 1
            order = pending[0] if pending else None
            pending = None
            if num in rings:
                other, order0, off0 = rings.pop(num)
                if order is not None and order0 is not None and order is not order0:
                    raise UnmatchedRingBond("conflicting ring-closure bond orders", off)
                add_bond(other, prev, order if order is not None else order0, off, ring=True)
            else:
                rings[num] = (prev, order, off)
            continue
        if ch == "[":
            close = text.find("]", i)
            if close < 0:
                raise UnsupportedToken("unterminated bracket atom", off)
            inner = text[i + 1:close]
            if inner in _AROMATIC:
                atom = (_AROMATIC[inner], True)
            else:
                try:
                    atom = (Element.from_symbol(inner), False)
                except KeyError:
                    raise UnsupportedToken(f"unsupported bracket atom [{inner}]", off) from None
            i = close + 1
        elif text.startswith("Cl", i) or text.startswith("Br", i):
            atom = (_ORGANIC[text[i:i + 2]], False)
            i += 2
        elif ch in _ORGANIC:
            atom = (_ORGANIC[ch], False)
            i += 1
        elif ch in _AROMATIC:
            atom = (_AROMATIC[ch], True)
            i += 1
        elif ch == ".":
            raise DisconnectedInput("multi-fragment input", off)
        else:
            raise UnsupportedToken(f"unsupported token {ch!r}", off)

        idx = len(specs)
        specs.append(atom)
        atom_offsets.append(off)
        if prev is not None:
            add_bond(prev, idx, pending[0] if pending else None, off)
        elif pending is not None:
            raise UnsupportedToken("bond symbol before first atom", pending[1])
        pending = None
        prev = idx

    if pending is not None:
        raise UnsupportedToken("dangling bond symbol", pending[1])
    if branch_stack:
        raise UnclosedBranch("unclosed '('", branch_stack[-1][1])
    if rings:
        off = min(v[2] for v in rings.values())
        raise UnmatchedRingBond("unclosed ring bond", off)
    if not specs:
        raise UnsupportedToken("empty SMILES", 0)
    return MolGraph.from_parts(specs, bonds, offsets=atom_offsets)


def read_smiles_file(path):
    """Yield SMILES strings from a file: one per line, ``#`` comments and
    blank lines skipped."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s and not s.startswith("#"):
                yield s
