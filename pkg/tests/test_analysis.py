"""Syntactic checks: allocation, reachability, axioms and anti-axioms."""

import random

import pytest

from helpers import ANTI, ANTI_QUERIES, DLL, TREE, load, ruleset, sequent
from slentail.analysis import (
    alloc, entails_pure, heap_satisfiable, is_anti_axiom, is_axiom, is_narrow,
    narrow_vars, path_edges, reachable, spec_vars,
)
from slentail.generate import random_ruleset, random_sequent
from slentail.semantics import has_countermodel, holds_pure, models
from slentail.syntax import PointsTo, PredAtom, heap, neq, var

x, y, z, u = var("x"), var("y"), var("z"), var("u")


def test_alloc_counts_duplicates():
    h = heap(PointsTo(x, ()), PredAtom("tree", (x,)))
    assert alloc(h)[x] == 2
    assert not heap_satisfiable(h)


def test_path_edges_follow_out_params():
    rs = ruleset(DLL)
    h = heap(PredAtom("dll", (x, y)), PointsTo(y, (z,)))
    assert path_edges(rs, h) == {(x, x), (x, y), (y, z)}
    assert reachable(path_edges(rs, h), [x]) == {x, y, z}
    assert reachable(path_edges(rs, h), [x], avoid=[y]) == {x, y}


def test_tree_has_no_out_edges():
    rs = ruleset(TREE)
    assert path_edges(rs, heap(PredAtom("tree", (x,)))) == set()


@pytest.mark.parametrize("query,form", [
    ("tree(x) |- tree(x)", 1),
    ("tree(x) /\\ x != x |- emp", 2),
    ("tree(x) * x -> () |- emp", 3),
    ("V: x tree(x) |- emp", 4),
    ("V: y, y tree(x) |- tree(x) * tree(y)", 4),
])
def test_axiom_forms(query, form):
    rs, s = sequent(TREE, query)
    assert is_axiom(s) == form


@pytest.mark.parametrize("k", range(5))
def test_anti_axiom_conditions(k):
    rs, qs = load(ANTI + "".join(f"entail {q};\n" for q in ANTI_QUERIES))
    assert is_anti_axiom(rs, qs[k]) == k + 1
    assert has_countermodel(rs, qs[k], 3, 4)


def test_equalities_block_anti_axioms():
    rs, s = sequent(ANTI, "p(x,y) /\\ x = y |- emp")
    assert is_anti_axiom(rs, s) is None


def test_narrowness():
    rs, s = sequent(DLL, "dll(x,y) |- dll(x,y)")
    assert narrow_vars(s) == {y}
    assert is_narrow(rs, s)
    _, s2 = sequent(DLL, "dll(x,y) /\\ x = y |- dll(x,y)")
    assert not is_narrow(rs, s2)
    _, s3 = sequent(DLL, "x -> (y,z) |- dll(x,y)")
    assert spec_vars(s3) == {y}
    _, s4 = sequent(DLL, "V: y x -> (y,z) |- dll(x,y)")
    assert spec_vars(s4) == set()


def _random_pairs(seed, count):
    rng = random.Random(seed)
    while count:
        rs = random_ruleset(rng)
        s = random_sequent(rng, rs)
        count -= 1
        yield rs, s


def test_syntactic_verdicts_agree_with_models():
    axioms = antis = 0
    for rs, s in _random_pairs(11, 400):
        if is_axiom(s) is not None:
            axioms += 1
            assert not has_countermodel(rs, s, 3, 5), s
        elif is_anti_axiom(rs, s) is not None:
            antis += 1
            # a few left-hand sides only have models beyond four cells
            assert has_countermodel(rs, s, 4, 6) or has_countermodel(rs, s, 6, 8), s
    assert axioms > 5 and antis > 20


def test_pure_entailment_is_sound():
    rng = random.Random(5)
    checked = 0
    for rs, s in _random_pairs(5, 300):
        locs = sorted({t for t in s.lhs.variables() if t.sort.is_loc}, key=lambda t: t.key)
        if len(locs) < 2:
            continue
        a, b = rng.sample(locs, 2)
        vset = tuple(v for v in locs if rng.random() < 0.3)
        z_ = neq(a, b)
        if not entails_pure(s.lhs, vset, [z_]):
            continue
        for store, _, _ in models(rs, s.lhs, (), 3, 5, vset):
            assert holds_pure(store, [z_])
        checked += 1
    assert checked > 20
