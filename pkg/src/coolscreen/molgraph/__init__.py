"""Molecular graphs: SMILES subset I/O, descriptors, rings, functional groups."""

from .canon import canonical_ranks, canonical_smiles, write_smiles
from .descriptors import CSV_HEADER, Descriptors, descriptors
from .elements import Element
from .errors import (
    DisconnectedInput,
    SmilesError,
    UnclosedBranch,
    UnmatchedRingBond,
    UnsupportedToken,
    ValenceViolation,
)
from .graph import Atom, Bond, BondOrder, MolGraph
from .groups import FunctionalGroupProfile, detect_groups
from .iso import is_isomorphic
from .rings import Ring, ring_atoms
from .smiles import parse_smiles, read_smiles_file

__all__ = [
    "Atom",
    "Bond",
    "BondOrder",
    "CSV_HEADER",
    "Descriptors",
    "DisconnectedInput",
    "Element",
    "FunctionalGroupProfile",
    "MolGraph",
    "Ring",
    "SmilesError",
    "UnclosedBranch",
    "UnmatchedRingBond",
    "UnsupportedToken",
    "ValenceViolation",
    "canonical_ranks",
    "canonical_smiles",
    "descriptors",
    "detect_groups",
    "is_isomorphic",
    "parse_smiles",
    "read_smiles_file",
    "ring_atoms",
    "write_smiles",
]
