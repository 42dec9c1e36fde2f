import time

import pytest

from coolscreen import nncore as nn
from coolscreen.filters import postfilter
from coolscreen.molgraph import Element, is_isomorphic, parse_smiles, write_smiles
from coolscreen.reactor import (
    NoReactiveSite,
    ReactantSets,
    Reaction,
    SinkFailure,
    classify_reactant,
    count_products,
    enumerate_library,
    esterify,
    library_counts,
    stream_products,
    williamson,
)
from coolscreen.synthetic import random_reactants


def P(s):
    return parse_smiles(s)


def test_classify_examples():
    assert classify_reactant(P("CCO")) == {"alcohol"}
    assert classify_reactant(P("CC(=O)O")) == {"acid"}
    assert classify_reactant(P("OCCCl")) == {"alcohol", "chloride"}


def test_williamson_examples():
    assert is_isomorphic(williamson(P("CCO"), P("CCCl")).product, P("CCOCC"))
    dme = williamson(P("CO"), P("CCl")).product
    assert len(dme.atoms) == 3 and is_isomorphic(dme, P("COC"))
    r = williamson(P("OCCCl"), P("CCl"))
    assert is_isomorphic(r.product, P("COCCCl"))
    assert not postfilter(r.product).passed
    assert r.reaction is Reaction.Ether


def test_esterify_examples():
    assert is_isomorphic(esterify(P("CCO"), P("CC(=O)O")).product, P("CCOC(C)=O"))
    mf = esterify(P("CO"), P("C(=O)O")).product
    assert len(mf.atoms) == 4 and is_isomorphic(mf, P("COC=O"))


def test_candidate_four_skeleton():
    alcohol = P("CCCCCCC(CCCC)CO")
    acid = P("CCC=C(C)C(=O)O")
    product = esterify(alcohol, acid).product
    expected = P("CCCCCCC(CCCC)COC(=O)C(C)=CCC")
    assert is_isomorphic(product, expected)
    carbons = sum(a.element is Element.C for a in product.atoms)
    oxygens = sum(a.element is Element.O for a in product.atoms)
    hydrogens = sum(a.implicit_h for a in product.atoms)
    assert (carbons, hydrogens, oxygens) == (18, 34, 2)


def test_no_site_errors():
    with pytest.raises(NoReactiveSite):
        williamson(P("CCC"), P("CCCl"))
    with pytest.raises(NoReactiveSite):
        esterify(P("CCO"), P("CCO"))


def test_atom_conservation():
    rng = nn.make_rng(5, "reactor")
    alcohols = random_reactants(6, "alcohol", rng)
    chlorides = random_reactants(4, "chloride", rng)
    acids = random_reactants(4, "acid", rng)
    sets = ReactantSets(alcohols, chlorides, acids)
    for _, rec in stream_products(sets):
        i, j = rec.parents
        a = sets.alcohols[i]
        partner = (sets.chlorides if rec.reaction is Reaction.Ether else sets.acids)[j]
        assert len(rec.product.atoms) == len(a.atoms) + len(partner.atoms) - 1
        assert write_smiles(P(write_smiles(rec.product))) == write_smiles(rec.product)


def test_count_examples():
    c = library_counts(3, 2, 0)
    assert (c.ethers, c.esters, c.total) == (6, 0, 6)
    assert library_counts(0, 5, 5).total == 0
    assert list(stream_products(ReactantSets([], [P("CCCl")], []))) == []
    t = time.perf_counter()
    c = library_counts(44_707, 10_719, 46_016)
    assert time.perf_counter() - t < 1.0
    assert (c.ethers, c.esters, c.total) == (479_214_333, 2_057_237_312, 2_536_451_645)


def test_stream_matches_count_and_order():
    rng = nn.make_rng(11, "reactor")
    sets = ReactantSets(random_reactants(7, "alcohol", rng), random_reactants(5, "chloride", rng),
                        random_reactants(3, "acid", rng))
    streamed = list(stream_products(sets))
    counts = count_products(sets)
    assert len(streamed) == counts.total
    keys = [(0 if cp.reaction is Reaction.Ether else 1, cp.i, cp.j) for cp, _ in streamed]
    assert keys == sorted(keys)
    again = [write_smiles(r.product) for _, r in stream_products(sets)]
    assert again == [write_smiles(r.product) for _, r in streamed]


def test_self_pair_excluded():
    both = P("OCCCl")
    sets = ReactantSets([both, P("CCO")], [both], [])
    assert count_products(sets).ethers == 1
    assert len(list(stream_products(sets))) == 1


def test_resume_and_shards():
    rng = nn.make_rng(2, "reactor")
    sets = ReactantSets(random_reactants(9, "alcohol", rng), random_reactants(4, "chloride", rng),
                        random_reactants(4, "acid", rng))
    full = [write_smiles(r.product) for _, r in stream_products(sets)]
    seen = []

    def flaky(rec):
        if len(seen) == 20:
            raise IOError("disk full")
        seen.append(write_smiles(rec.product))

    with pytest.raises(SinkFailure) as info:
        enumerate_library(sets, "stream", flaky)
    cp = info.value.checkpoint
    rest = [write_smiles(r.product) for _, r in stream_products(sets, start=cp)]
    assert seen + rest == full

    sharded = []
    total = None
    for k in range(3):
        c = enumerate_library(sets, "stream", lambda r: sharded.append(write_smiles(r.product)), shard=(k, 3))
        total = c if total is None else total + c
    assert sorted(sharded) == sorted(full)
    assert total == count_products(sets)
    assert enumerate_library(sets, "count_only") == count_products(sets)


def test_reactant_sets_validate_and_dedupe():
    sets = ReactantSets([P("CCO"), P("OCC")], [], [])
    assert len(sets.alcohols) == 1
    with pytest.raises(ValueError):
        ReactantSets([P("c1ccccc1CO")], [], [])
    with pytest.raises(NoReactiveSite):
        ReactantSets([P("CCC")], [], [])
