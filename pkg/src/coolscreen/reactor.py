"""Virtual single-step reactions and combinatorial library enumeration.

Two templates are supported: Williamson ether synthesis (alcohol + alkyl
chloride -> ether + HCl) and esterification (alcohol + carboxylic acid ->
ester + H2O).  Each ordered reactant pair yields exactly one product, using
the reactive site with the lowest canonical atom rank on each side.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from .filters import prefilter
from .molgraph import Bond, MolGraph, canonical_ranks, detect_groups, write_smiles


class Reaction(str, Enum):
    Ether = "ether"
    Ester = "ester"


REACTION_ORDER = (Reaction.Ether, Reaction.Ester)


class NoReactiveSite(ValueError):
    pass


class SinkFailure(RuntimeError):
    """Raised when the product sink fails; ``checkpoint`` is the next pair to
    produce when resuming."""

    def __init__(self, message, checkpoint):
        super().__init__(f"{message}; resume from {checkpoint}")
        self.checkpoint = checkpoint


class Checkpoint(NamedTuple):
    reaction: Reaction
    i: int
    j: int


@dataclass(frozen=True)
class ProductRecord:
    product: MolGraph
    reaction: Reaction
    parents: tuple
    site_choice: tuple


@dataclass(frozen=True)
class LibraryCounts:
    ethers: int
    esters: int

    @property
    def total(self):
        return self.ethers + self.esters

    def __add__(self, other):
        return LibraryCounts(self.ethers + other.ethers, self.esters + other.esters)

    def to_dict(self):
        return {"ethers": self.ethers, "esters": self.esters, "total": self.total}


def classify_reactant(g, profile=None):
    p = profile or detect_groups(g)
    roles = set()
    if p.alcohol:
        roles.add("alcohol")
    if p.alkyl_chloride:
        roles.add("chloride")
    if p.carboxylic_acid:
        roles.add("acid")
    return roles


def _lowest(sites, ranks, key_pos=0, tie_pos=1):
    return min(sites, key=lambda s: (ranks[s[key_pos]], ranks[s[tie_pos]]))


def _join(a, b, drop_b, new_bond):
    """Concatenate ``a`` and ``b`` (minus atom ``drop_b``) and add ``new_bond``
    (a-index, b-index)."""
    remap = {}
    specs = a.specs()
    for i, atom in enumerate(b.atoms):
        if i == drop_b:
            continue
        remap[i] = len(specs)
        specs.append((atom.element, atom.aromatic))
    bonds = list(a.bonds)
    for bd in b.bonds:
        if drop_b in (bd.begin, bd.end):
            continue
        bonds.append(Bond(remap[bd.begin], remap[bd.end], bd.order))
    bonds.append(Bond(new_bond[0], remap[new_bond[1]]))
    return MolGraph.from_parts(specs, bonds)


def alcohol_site(a):
    sites = detect_groups(a).alcohol
    if not sites:
        raise NoReactiveSite("no alcohol C-OH site")
    return _lowest(sites, canonical_ranks(a))


def chloride_site(c):
    sites = detect_groups(c).alkyl_chloride
    if not sites:
        raise NoReactiveSite("no sp3 C-Cl site")
    return _lowest(sites, canonical_ranks(c))


def acid_site(x):
    sites = detect_groups(x).carboxylic_acid
    if not sites:
        raise NoReactiveSite("no C(=O)OH site")
    return _lowest(sites, canonical_ranks(x), 0, 2)


def williamson(a, c, parents=(0, 0), sites=None):
    """Alcohol O bonds to the chloride carbon; Cl leaves."""
    (o, _), (cc, cl) = sites or (alcohol_site(a), chloride_site(c))
    product = _join(a, c, cl, (o, cc))
    return ProductRecord(product, Reaction.Ether, tuple(parents), (o, cc))


def esterify(a, x, parents=(0, 0), sites=None):
    """Alcohol O bonds to the acid carbonyl carbon; the acid OH leaves."""
    (o, _), (c, _, oh) = sites or (alcohol_site(a), acid_site(x))
    product = _join(a, x, oh, (o, c))
    return ProductRecord(product, Reaction.Ester, tuple(parents), (o, c))


class ReactantSets:
    """Deduplicated, prefiltered reactant lists with cached reactive sites."""

    def __init__(self, alcohols=(), chlorides=(), acids=()):
        self._sites = {}
        self.alcohols, self.alcohol_smiles = self._prepare(alcohols, "alcohol", alcohol_site)
        self.chlorides, self.chloride_smiles = self._prepare(chlorides, "chloride", chloride_site)
        self.acids, self.acid_smiles = self._prepare(acids, "acid", acid_site)

    def _prepare(self, graphs, role, site_fn):
        out, smiles, seen, sites = [], [], set(), []
        for g in graphs:
            s = write_smiles(g)
            if s in seen:
                continue
            if not prefilter(g).passed:
                raise ValueError(f"{s} fails the structure prefilter")
            if role not in classify_reactant(g):
                raise NoReactiveSite(f"{s} has no {role} site")
            seen.add(s)
            out.append(g)
            smiles.append(s)
            sites.append(site_fn(g))
        self._sites[role] = sites
        return out, smiles

    @classmethod
    def from_smiles(cls, alcohols=(), chlorides=(), acids=()):
        from .molgraph import parse_smiles

        return cls(
            [parse_smiles(s) for s in alcohols],
            [parse_smiles(s) for s in chlorides],
            [parse_smiles(s) for s in acids],
        )

    def site(self, role, idx):
        return self._sites[role][idx]

    def partners(self, reaction):
        if reaction is Reaction.Ether:
            return self.chlorides, self.chloride_smiles
        return self.acids, self.acid_smiles

    def shard_range(self, shard=None):
        n = len(self.alcohols)
        if shard is None:
            return 0, n
        k, parts = shard
        if not 0 <= k < parts:
            raise ValueError(f"bad shard {k}/{parts}")
        return k * n // parts, (k + 1) * n // parts


def library_counts(n_alcohols, n_chlorides, n_acids):
    """Product counts from set sizes alone (no self-pairs assumed)."""
    return LibraryCounts(n_alcohols * n_chlorides, n_alcohols * n_acids)


def _overlap(left, right, lo, hi):
    right_set = set(right)
    return sum(1 for s in left[lo:hi] if s in right_set)


def count_products(sets, shard=None):
    """Count-only enumeration; self-pairs (same library entry on both sides)
    are excluded exactly as in streaming mode."""
    lo, hi = sets.shard_range(shard)
    n = hi - lo
    ethers = n * len(sets.chlorides) - _overlap(sets.alcohol_smiles, sets.chloride_smiles, lo, hi)
    esters = n * len(sets.acids) - _overlap(sets.alcohol_smiles, sets.acid_smiles, lo, hi)
    return LibraryCounts(ethers, esters)


def stream_products(sets, start=None, shard=None):
    """Yield ``(checkpoint, ProductRecord)`` in (reaction, i, j) order.

    ``start`` is the first checkpoint to produce (inclusive); ``shard=(k, n)``
    restricts alcohols to the k-th contiguous block of n.
    """
    lo, hi = sets.shard_range(shard)
    start_key = None
    if start is not None:
        start_key = (REACTION_ORDER.index(Reaction(start[0])), start[1], start[2])
    for r_idx, reaction in enumerate(REACTION_ORDER):
        partners, partner_smiles = sets.partners(reaction)
        role = "chloride" if reaction is Reaction.Ether else "acid"
        make = williamson if reaction is Reaction.Ether else esterify
        for i in range(lo, hi):
            if start_key is not None and (r_idx, i) < start_key[:2]:
                continue
            a = sets.alcohols[i]
            a_site = sets.site("alcohol", i)
            a_smiles = sets.alcohol_smiles[i]
            j0 = start_key[2] if start_key is not None and (r_idx, i) == start_key[:2] else 0
            for j in range(j0, len(partners)):
                if partner_smiles[j] == a_smiles:
                    continue
                rec = make(a, partners[j], (i, j), (a_site, sets.site(role, j)))
                yield Checkpoint(reaction, i, j), rec


def enumerate_library(sets, mode="stream", sink=None, start=None, shard=None):
    """Enumerate products; returns :class:`LibraryCounts`.

    ``count_only`` never builds products.  In ``stream`` mode each record is
    passed to ``sink`` (a callable); a sink error raises
    :class:`SinkFailure` carrying the checkpoint to resume from.
    """
    if mode == "count_only":
        return count_products(sets, shard)
    if mode != "stream":
        raise ValueError(f"unknown mode {mode!r}")
    ethers = esters = 0
    for cp, rec in stream_products(sets, start, shard):
        if sink is not None:
            try:
                sink(rec)
            except Exception as exc:
                raise SinkFailure(f"sink failed: {exc}", cp) from exc
        if rec.reaction is Reaction.Ether:
            ethers += 1
        else:
            esters += 1
    return LibraryCounts(ethers, esters)
